"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Two kernels dominate the runtime of scans and disorder ensembles:

* ``coupling_matrix``: all pairwise dipole-dipole couplings of an atom set.
* ``two_level_response``: impurity-1 population and its detuning derivative
  for the 2x2 effective model, over many (detuning, time) points.

The numba implementations are used when numba imports cleanly and the
environment variable ``ARRAYQED_DISABLE_NUMBA`` is unset (or ``0``).  Both
implementations stay importable as ``*_numpy`` / ``*_numba`` so tests and
``benchmarks/bench_kernels.py`` can compare them directly.
"""

import os

import numpy as np

_DISABLED = os.environ.get("ARRAYQED_DISABLE_NUMBA", "0") not in ("", "0", "false", "False")

try:
    if _DISABLED:
        raise ImportError("numba disabled by ARRAYQED_DISABLE_NUMBA")
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA

# series switch-over for sin(x)/S and (x cos x - sin x)/S^3; truncation ~ x^6
_SMALL_X = 1e-2


# --------------------------------------------------------------------------
# pairwise coupling matrix
# --------------------------------------------------------------------------

def coupling_matrix_numpy(positions, polarization, k0):
    """-(3 pi / k0) d^* . G(r_i - r_j) . d for all pairs, zero diagonal."""
    pos = np.asarray(positions, dtype=np.float64)
    d = np.asarray(polarization, dtype=np.complex128)
    n = pos.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    r = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", r, r))
    np.fill_diagonal(dist, 1.0)
    unit = r / dist[..., None]
    kr = k0 * dist
    pref = np.exp(1j * kr) / (4.0 * np.pi * dist)
    a_term = 1.0 + 1j / kr - 1.0 / kr**2
    b_term = 1.0 + 3j / kr - 3.0 / kr**2
    dd = np.vdot(d, d).real
    left = unit @ d.conj()
    right = unit @ d
    out = -(3.0 * np.pi / k0) * pref * (a_term * dd - b_term * left * right)
    np.fill_diagonal(out, 0.0)
    return out


def two_level_response_numpy(h11, h22, h12, h21, delta, t):
    """Population |c1(t)|^2 and d|c1|^2/dDelta for c(0) = (0, 1).

    The 2x2 generator is [[h11, h12], [h21, h22 + delta]] (i dc/dt = H c).
    ``delta`` and ``t`` broadcast against each other.
    """
    delta, t = np.broadcast_arrays(np.asarray(delta, dtype=np.float64),
                                   np.asarray(t, dtype=np.float64))
    q = h11 - (h22 + delta)
    s = np.sqrt(0.25 * q * q + h12 * h21 + 0j)
    gam = -(h11 + h22).imag
    x = s * t
    damp = np.exp(-0.5 * gam * t)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        u = np.exp(1j * x - 0.5 * gam * t)
        v = np.exp(-1j * x - 0.5 * gam * t)
        sin_d = (u - v) / 2j
        cos_d = (u + v) / 2.0
        f_big = sin_d / s
        g_big = (x * cos_d - sin_d) / s**3
    x2 = x * x
    f_small = t * (1.0 - x2 / 6.0 + x2 * x2 / 120.0) * damp
    g_small = t**3 * (-1.0 / 3.0 + x2 / 30.0 - x2 * x2 / 840.0) * damp
    small = np.abs(x) < _SMALL_X
    f = np.where(small, f_small, f_big)
    g = np.where(small, g_small, g_big)
    amp = abs(h12) ** 2
    p = amp * (f.real**2 + f.imag**2)
    dp = amp * 2.0 * (np.conj(f) * (-0.25 * q) * g).real
    return p, dp


if HAVE_NUMBA:

    @njit(cache=True)
    def _coupling_matrix_jit(pos, d, k0):
        n = pos.shape[0]
        out = np.zeros((n, n), dtype=np.complex128)
        dd = (d[0].conjugate() * d[0] + d[1].conjugate() * d[1]
              + d[2].conjugate() * d[2]).real
        pre = -3.0 * np.pi / k0
        for i in range(n):
            for j in range(i + 1, n):
                rx = pos[i, 0] - pos[j, 0]
                ry = pos[i, 1] - pos[j, 1]
                rz = pos[i, 2] - pos[j, 2]
                dist = np.sqrt(rx * rx + ry * ry + rz * rz)
                nx = rx / dist
                ny = ry / dist
                nz = rz / dist
                kr = k0 * dist
                g0 = np.exp(1j * kr) / (4.0 * np.pi * dist)
                a_term = 1.0 + 1j / kr - 1.0 / (kr * kr)
                b_term = 1.0 + 3j / kr - 3.0 / (kr * kr)
                left = nx * d[0].conjugate() + ny * d[1].conjugate() + nz * d[2].conjugate()
                right = nx * d[0] + ny * d[1] + nz * d[2]
                val = pre * g0 * (a_term * dd - b_term * left * right)
                out[i, j] = val
                out[j, i] = val
        return out

    @njit(cache=True)
    def _two_level_response_jit(h11, h22, h12, h21, delta, t):
        m = delta.shape[0]
        p = np.empty(m)
        dp = np.empty(m)
        gam = -(h11 + h22).imag
        amp = abs(h12) ** 2
        for k in range(m):
            q = h11 - (h22 + delta[k])
            s = np.sqrt(0.25 * q * q + h12 * h21)
            tk = t[k]
            x = s * tk
            damp = np.exp(-0.5 * gam * tk)
            if abs(x) < _SMALL_X:
                x2 = x * x
                f = tk * (1.0 - x2 / 6.0 + x2 * x2 / 120.0) * damp
                g = tk**3 * (-1.0 / 3.0 + x2 / 30.0 - x2 * x2 / 840.0) * damp
            else:
                u = np.exp(1j * x - 0.5 * gam * tk)
                v = np.exp(-1j * x - 0.5 * gam * tk)
                sin_d = (u - v) / 2j
                cos_d = (u + v) / 2.0
                f = sin_d / s
                g = (x * cos_d - sin_d) / (s * s * s)
            p[k] = amp * (f.real * f.real + f.imag * f.imag)
            dp[k] = amp * 2.0 * (f.conjugate() * (-0.25 * q) * g).real
        return p, dp

    def coupling_matrix_numba(positions, polarization, k0):
        pos = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
        d = np.ascontiguousarray(polarization, dtype=np.complex128)
        return _coupling_matrix_jit(pos, d, float(k0))

    def two_level_response_numba(h11, h22, h12, h21, delta, t):
        delta, t = np.broadcast_arrays(np.asarray(delta, dtype=np.float64),
                                       np.asarray(t, dtype=np.float64))
        shape = delta.shape
        p, dp = _two_level_response_jit(complex(h11), complex(h22), complex(h12),
                                        complex(h21),
                                        np.ascontiguousarray(delta).ravel(),
                                        np.ascontiguousarray(t).ravel())
        return p.reshape(shape), dp.reshape(shape)

else:
    coupling_matrix_numba = None
    two_level_response_numba = None


if NUMBA_ENABLED:
    coupling_matrix = coupling_matrix_numba
    two_level_response = two_level_response_numba
else:
    coupling_matrix = coupling_matrix_numpy
    two_level_response = two_level_response_numpy
