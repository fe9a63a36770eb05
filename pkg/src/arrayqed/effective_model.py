"""Adiabatic elimination of the lattice: from (l+2) atoms to a 2x2 impurity model.

Convention: amplitudes obey i dc/dt = H c in the frame rotating at the
impurity-1 frequency.  The effective generator is

    H_eff = [[gamma1 Sigma1 - i gamma1/2,    sqrt(g1 g2) kappa1        ],
             [sqrt(g1 g2) kappa2,            Delta + gamma2 Sigma2 - i gamma2/2]]

with the detuning Delta placed on impurity 2.
"""

import math
import warnings
from dataclasses import dataclass, fields, replace

import numpy as np
import scipy.linalg as sla

from .errors import ConditioningError, GeometryError
from .geometry import Geometry, LatticeSpec, build_lattice
from .greens import K0, coupling_matrix

RCOND_MIN = 1e-12
ADIABATIC_RATIO = 0.1


@dataclass(frozen=True)
class EffectiveParams:
    sigma1: complex
    sigma2: complex
    kappa1: complex
    kappa2: complex
    gamma1: float
    gamma2: float
    delta: float = 0.0

    @property
    def gamma_coop(self):
        return 1.0 - self.sigma1.imag - self.sigma2.imag

    @property
    def delta0(self):
        return self.gamma1 * self.sigma1.real - self.gamma2 * self.sigma2.real

    @property
    def gamma_bar(self):
        return 0.5 * (self.gamma1 + self.gamma2)

    @property
    def g(self):
        """Geometric-mean impurity rate sqrt(gamma1 gamma2) (the tilde unit)."""
        return math.sqrt(self.gamma1 * self.gamma2)

    @property
    def R(self):
        return self.gamma1 / self.gamma2

    def heff(self, delta=None):
        delta = self.delta if delta is None else delta
        g = self.g
        return np.array([
            [self.gamma1 * self.sigma1 - 0.5j * self.gamma1, g * self.kappa1],
            [g * self.kappa2, delta + self.gamma2 * self.sigma2 - 0.5j * self.gamma2],
        ])

    def generator(self):
        """(h11, h22 without Delta, h12, h21) for the response kernel."""
        g = self.g
        return (self.gamma1 * self.sigma1 - 0.5j * self.gamma1,
                self.gamma2 * self.sigma2 - 0.5j * self.gamma2,
                g * self.kappa1, g * self.kappa2)

    def with_ratio(self, R):
        g = self.g
        return replace(self, gamma1=g * math.sqrt(R), gamma2=g / math.sqrt(R))

    def with_gamma(self, g):
        """Rescale both impurity rates to geometric mean ``g`` at fixed R."""
        s = g / self.g
        return replace(self, gamma1=self.gamma1 * s, gamma2=self.gamma2 * s)

    def symmetrized(self):
        """Mean self-energy and coupling on both impurities (single-Sigma model)."""
        s = 0.5 * (self.sigma1 + self.sigma2)
        k = 0.5 * (self.kappa1 + self.kappa2)
        return replace(self, sigma1=s, sigma2=s, kappa1=k, kappa2=k)

    def quasi_rabi(self, delta=None):
        h = self.heff(delta)
        return np.sqrt(0.25 * (h[0, 0] - h[1, 1]) ** 2 + h[0, 1] * h[1, 0] + 0j)

    def physicality(self, delta=None):
        """Flags for the three physicality conditions (all True = physical)."""
        h = self.heff(delta)
        decay = -(h[0, 0] + h[1, 1]).imag
        s = self.quasi_rabi(delta)
        return {
            "im_sigma": bool(self.sigma1.imag < 0.5 and self.sigma2.imag < 0.5),
            "gamma_coop": bool(0.0 < self.gamma_coop <= 1.0),
            "envelope": bool(decay > 2.0 * abs(s.imag)),
        }

    def is_physical(self, delta=None):
        return all(self.physicality(delta).values())

    def to_record(self):
        return {
            "re_sigma1": self.sigma1.real, "im_sigma1": self.sigma1.imag,
            "re_sigma2": self.sigma2.real, "im_sigma2": self.sigma2.imag,
            "re_kappa": self.kappa1.real, "im_kappa": self.kappa1.imag,
            "re_kappa2": self.kappa2.real, "im_kappa2": self.kappa2.imag,
            "gamma1": self.gamma1, "gamma2": self.gamma2, "delta": self.delta,
        }

    @classmethod
    def from_record(cls, rec):
        f = {k: float(v) for k, v in rec.items()}
        return cls(
            sigma1=complex(f["re_sigma1"], f["im_sigma1"]),
            sigma2=complex(f["re_sigma2"], f["im_sigma2"]),
            kappa1=complex(f["re_kappa"], f["im_kappa"]),
            kappa2=complex(f.get("re_kappa2", f["re_kappa"]), f.get("im_kappa2", f["im_kappa"])),
            gamma1=f["gamma1"], gamma2=f["gamma2"], delta=f.get("delta", 0.0),
        )


RECORD_KEYS = list(EffectiveParams(0j, 0j, 0j, 0j, 1.0, 1.0).to_record())


def derived_quantities(p):
    """(Gamma_coop, Delta0, gamma_bar)."""
    return p.gamma_coop, p.delta0, p.gamma_bar


@dataclass(frozen=True, eq=False)
class BathMatrix:
    H_L: np.ndarray
    C_L1: np.ndarray
    C_L2: np.ndarray
    c12: complex


def _coupling_all(geom):
    return coupling_matrix(geom.positions, geom.polarization, K0)


def build_bath(geom):
    c = _coupling_all(geom)
    ell = geom.n_lattice
    rates = geom.rates
    scale = np.sqrt(np.outer(rates, rates))
    h = scale * c
    H_L = h[:ell, :ell].copy()
    H_L[np.diag_indices(ell)] = geom.delta_LI - 0.5j * geom.gamma_L
    return BathMatrix(H_L=H_L, C_L1=h[:ell, ell].copy(), C_L2=h[:ell, ell + 1].copy(),
                      c12=complex(h[ell, ell + 1]))


def full_hamiltonian(geom, delta=0.0):
    """Single-excitation generator over lattice atoms then impurities 1, 2."""
    c = _coupling_all(geom)
    rates = geom.rates
    h = np.sqrt(np.outer(rates, rates)) * c
    ell = geom.n_lattice
    idx = np.arange(ell)
    h[idx, idx] = geom.delta_LI - 0.5j * geom.gamma_L
    h[ell, ell] = -0.5j * geom.gamma_1
    h[ell + 1, ell + 1] = delta - 0.5j * geom.gamma_2
    return h


def _adiabatic_guard(gamma1, gamma2, gamma_L):
    if max(gamma1, gamma2) / gamma_L > ADIABATIC_RATIO:
        warnings.warn(f"impurity rates max(g1, g2)/gL = {max(gamma1, gamma2) / gamma_L:.3g} "
                      f"exceed {ADIABATIC_RATIO}; adiabatic elimination is unreliable",
                      stacklevel=3)


def eliminate_real_space(bath, gamma1, gamma2, delta=0.0):
    """Self-energies and effective couplings from one LU factorisation of H_L."""
    g = math.sqrt(gamma1 * gamma2)
    ell = bath.H_L.shape[0]
    if ell == 0:
        k = bath.c12 / g
        return EffectiveParams(0j, 0j, k, k, gamma1, gamma2, delta)
    sv = np.linalg.svd(bath.H_L, compute_uv=False)
    if sv[-1] <= RCOND_MIN * sv[0]:
        cond = sv[0] / sv[-1] if sv[-1] > 0 else math.inf
        raise ConditioningError(f"bath matrix is singular to working precision (cond ~ {cond:.3g})",
                                cond=cond)
    lu = sla.lu_factor(bath.H_L, check_finite=False)
    x = sla.lu_solve(lu, np.column_stack([bath.C_L1, bath.C_L2]), check_finite=False)
    # H_L complex symmetric, so C_1L^T = C_L1^T
    s1 = -(bath.C_L1 @ x[:, 0]) / gamma1
    s2 = -(bath.C_L2 @ x[:, 1]) / gamma2
    k1 = (bath.c12 - bath.C_L1 @ x[:, 1]) / g
    k2 = (bath.c12 - bath.C_L2 @ x[:, 0]) / g
    return EffectiveParams(complex(s1), complex(s2), complex(k1), complex(k2),
                           gamma1, gamma2, delta)


def effective_params(geom, delta=0.0):
    """build_bath + eliminate_real_space for a geometry."""
    _adiabatic_guard(geom.gamma_1, geom.gamma_2, geom.gamma_L)
    return eliminate_real_space(build_bath(geom), geom.gamma_1, geom.gamma_2, delta)


def _min_image(n):
    o = np.arange(n)
    return np.where(o > n // 2, o - n, o)


def eliminate_momentum_space(spec):
    """Self-energies and couplings as Bloch-mode sums over a periodic lattice.

    The bath is the ``nx`` x ``ny`` lattice on a torus (minimum-image
    couplings), diagonal in the lattice momenta k.  The two sites occupied by
    the impurities are removed from the bath exactly through a rank-2 Schur
    correction built from the same k-sums.
    """
    if isinstance(spec, Geometry):
        if spec.disordered:
            raise GeometryError("momentum-space elimination needs a periodic lattice; "
                                "Bloch's theorem does not hold for a disordered geometry")
        raise GeometryError("pass the LatticeSpec of the undisordered lattice")
    geom = build_lattice(spec)
    nx, ny = spec.nx, spec.ny
    a = spec.spacing
    d = geom.polarization
    gL, g1, g2 = spec.gamma_L, spec.gamma_1, spec.gamma_2
    g = math.sqrt(g1 * g2)
    imp = [tuple(int(v) for v in s) for s in geom.impurity_sites]
    c12 = g * coupling_matrix(geom.impurity_positions, d, K0)[0, 1]
    if nx * ny == 2:
        k = c12 / g
        return EffectiveParams(0j, 0j, k, k, g1, g2, 0.0)

    ox, oy = _min_image(nx) * a, _min_image(ny) * a
    X, Y = np.meshgrid(ox, oy, indexing="ij")
    offsets = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    # kernel f(r) = dimensionless coupling to the site at offset r from the origin
    origin = np.zeros((1, 3))
    f = coupling_matrix(np.vstack([origin, offsets[1:]]), d, K0)[0]
    f = np.concatenate([[0.0], f[1:]]).reshape(nx, ny)
    lam = gL * (spec.delta_LI / gL - 0.5j + np.fft.fft2(f))
    inv_lam = 1.0 / lam
    gker = np.fft.ifft2(inv_lam)        # (H_torus^-1)[m, n] = gker[m - n]

    def impurity_vector(site, gd):
        i0, j0 = site
        vec = np.roll(np.roll(f, i0, axis=0), j0, axis=1) * math.sqrt(gL * gd)
        for vi, vj in imp:
            vec[vi, vj] = 0.0
        return vec

    C = [impurity_vector(imp[0], g1), impurity_vector(imp[1], g2)]
    F = [np.fft.fft2(c) for c in C]
    N = nx * ny

    def neg(arr):
        return np.roll(np.flip(arr, axis=(0, 1)), 1, axis=(0, 1))

    # A[d, e] = sum_k C_d(k) C_e(-k) / lambda(k)
    A = np.array([[np.sum(F[p] * neg(F[q]) * inv_lam) / N for q in range(2)] for p in range(2)])
    # P[d, v] = C_d^T G[:, v]
    P = np.array([[np.fft.ifft2(F[p] * inv_lam)[v] for v in imp] for p in range(2)])
    G_vv = np.array([[gker[(v[0] - w[0]) % nx, (v[1] - w[1]) % ny] for w in imp] for v in imp])
    corr = P @ np.linalg.solve(G_vv, P.T)
    M = A - corr
    s1 = -M[0, 0] / g1
    s2 = -M[1, 1] / g2
    k1 = (c12 - M[0, 1]) / g
    k2 = (c12 - M[1, 0]) / g
    return EffectiveParams(complex(s1), complex(s2), complex(k1), complex(k2), g1, g2, 0.0)


def momentum_real_discrepancy(spec, sizes=(6, 10, 16)):
    """Max |difference| of (Sigma1, Sigma2, kappa1) between the two routes per lattice size."""
    out = []
    for n in sizes:
        s = replace(spec, nx=n, ny=n)
        pk = eliminate_momentum_space(s)
        pr = effective_params(build_lattice(s))
        diff = max(abs(pk.sigma1 - pr.sigma1), abs(pk.sigma2 - pr.sigma2),
                   abs(pk.kappa1 - pr.kappa1))
        out.append((n, float(diff)))
    return out


def params_from_spec(spec, delta=0.0):
    return effective_params(build_lattice(spec), delta)


def params_fields():
    return [f.name for f in fields(EffectiveParams)]


__all__ = [
    "EffectiveParams", "BathMatrix", "LatticeSpec", "build_bath", "full_hamiltonian",
    "eliminate_real_space", "eliminate_momentum_space", "effective_params",
    "derived_quantities", "momentum_real_discrepancy", "params_from_spec",
]
