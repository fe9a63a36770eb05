"""Free-space dyadic Green's tensor and dipole-dipole coupling rates.

Units: lengths in lattice wavelengths, so the wavenumber is ``K0 = 2 pi``.
Sign convention: J_ij = -(3 pi / k0) d^* Re G d and Gamma_ij = +(6 pi / k0)
d^* Im G d, so Gamma_ij -> gamma_i as r -> 0 (bare decay is positive).
"""

from collections import namedtuple

import numpy as np

from . import _kernels
from .errors import SingularityError

K0 = 2.0 * np.pi

PairCoupling = namedtuple("PairCoupling", ["J", "Gamma"])


def green_tensor(r_vec, k0=K0):
    """3x3 free-space Green's tensor at separation ``r_vec`` (contact term dropped)."""
    r_vec = np.asarray(r_vec, dtype=float).reshape(3)
    r = np.linalg.norm(r_vec)
    if r == 0:
        raise SingularityError("Green's tensor is singular at r = 0")
    kr = k0 * r
    n = r_vec / r
    pref = np.exp(1j * kr) / (4 * np.pi * r)
    return pref * ((1 + 1j / kr - 1 / kr**2) * np.eye(3)
                   - (1 + 3j / kr - 3 / kr**2) * np.outer(n, n))


def coupling_rates(ri, rj, di, dj=None, gi=1.0, gj=1.0, k0=K0):
    """Coherent and dissipative pair rates (J, Gamma), multiplied by sqrt(gi gj)."""
    di = np.asarray(di, dtype=complex)
    dj = di if dj is None else np.asarray(dj, dtype=complex)
    rij = np.asarray(ri, dtype=float) - np.asarray(rj, dtype=float)
    if not np.any(rij):
        raise SingularityError("coincident positions")
    g = green_tensor(rij, k0)
    scale = np.sqrt(gi * gj)
    J = -3 * np.pi / k0 * scale * (di.conj() @ g.real @ dj)
    Gamma = 6 * np.pi / k0 * scale * (di.conj() @ g.imag @ dj)
    # identical (or real) polarizations give real rates
    if abs(J.imag) <= 1e-14 * max(1.0, abs(J)) and abs(Gamma.imag) <= 1e-14 * max(1.0, abs(Gamma)):
        return PairCoupling(float(J.real), float(Gamma.real))
    return PairCoupling(J, Gamma)


def coupling_matrix(positions, polarization, k0=K0):
    """Dimensionless (J - i Gamma/2) for every ordered pair; zero diagonal.

    Complex symmetric.  Multiply entry (i, j) by sqrt(gamma_i gamma_j) to get
    the Hamiltonian element.
    """
    return _kernels.coupling_matrix(positions, polarization, k0)


def dissipative_matrix(positions, polarization, k0=K0):
    """Gamma_mn over an atom set, diagonal = 1 (units of sqrt(gamma_m gamma_n))."""
    c = coupling_matrix(positions, polarization, k0)
    # -Gamma/2 = Im c for the shared (real-valued d^* G d split) case
    gam = -2.0 * (c - c.conj().T) / 2j
    gam = 0.5 * (gam + gam.conj().T)
    np.fill_diagonal(gam, 1.0)
    return gam
