import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arrayqed.effective_model import (EffectiveParams, build_bath, effective_params,
                                      eliminate_momentum_space, eliminate_real_space,
                                      full_hamiltonian, momentum_real_discrepancy,
                                      params_from_spec)
from arrayqed.errors import ConditioningError, GeometryError
from arrayqed.geometry import LatticeSpec, apply_disorder, build_lattice
from arrayqed.greens import coupling_rates


def dense_oracle(geom):
    """Sigma, kappa from an explicit inverse of the full bath block."""
    H = full_hamiltonian(geom, 0.0)
    ell = geom.n_lattice
    HL = H[:ell, :ell]
    inv = np.linalg.inv(HL)
    C1, C2 = H[:ell, ell], H[:ell, ell + 1]
    g1, g2 = geom.gamma_1, geom.gamma_2
    g = np.sqrt(g1 * g2)
    return (-(C1 @ inv @ C1) / g1, -(C2 @ inv @ C2) / g2,
            (H[ell, ell + 1] - C1 @ inv @ C2) / g)


def test_matches_dense_inverse(geom, params):
    s1, s2, k = dense_oracle(geom)
    assert params.sigma1 == pytest.approx(s1, rel=1e-11)
    assert params.sigma2 == pytest.approx(s2, rel=1e-11)
    assert params.kappa1 == pytest.approx(k, rel=1e-11)
    assert params.kappa2 == pytest.approx(k, rel=1e-11)


def test_frozen_default_values(params):
    # frozen from the dense-inverse oracle, 10x10, a = 0.3, d = 2a, z-polarised
    assert params.sigma1 == pytest.approx(-0.5253613193394955 + 0.48599825314010703j, rel=1e-9)
    assert params.sigma2 == pytest.approx(-0.5253341685476228 + 0.4859988463563684j, rel=1e-9)
    assert params.kappa1 == pytest.approx(0.051278160983228516 + 0.004643984950130037j, rel=1e-9)
    assert params.gamma_coop == pytest.approx(0.028002900503524553, rel=1e-9)


def test_free_pair_is_exact():
    geom = build_lattice(LatticeSpec(nx=1, ny=2, separation=0.3))
    p = effective_params(geom)
    J, G = coupling_rates(geom.impurity_positions[0], geom.impurity_positions[1], [0, 0, 1])
    assert p.sigma1 == 0 and p.sigma2 == 0
    assert p.kappa1 == pytest.approx(J - 0.5j * G, rel=1e-14)
    assert p.gamma_coop == 1.0


@settings(max_examples=15, deadline=None)
@given(st.floats(1e-4, 0.05), st.floats(0.2, 5.0))
def test_independent_of_impurity_rate_scale(g, R):
    base = params_from_spec(LatticeSpec(nx=6, ny=6))
    spec = LatticeSpec(nx=6, ny=6, gamma_1=g * np.sqrt(R), gamma_2=g / np.sqrt(R))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = params_from_spec(spec)
    for a, b in ((p.sigma1, base.sigma1), (p.sigma2, base.sigma2), (p.kappa1, base.kappa1)):
        assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_mirror_symmetric_layout_gives_equal_self_energies():
    # 11 columns with d = 2a leave the pair centred: Sigma1 = Sigma2
    p = params_from_spec(LatticeSpec(nx=11, ny=10))
    assert p.sigma1 == pytest.approx(p.sigma2, rel=1e-12)
    assert p.kappa1 == pytest.approx(p.kappa2, rel=1e-12)
    p = params_from_spec(LatticeSpec(nx=10, ny=10, separation=0.9))
    assert p.sigma1 == pytest.approx(p.sigma2, rel=1e-12)


def brute_force_torus(spec):
    """Periodic bath built element by element with minimum-image distances."""
    nx, ny, a = spec.nx, spec.ny, spec.spacing
    geom = build_lattice(spec)
    sites = [(i, j) for i in range(nx) for j in range(ny)]
    imp = [tuple(s) for s in geom.impurity_sites]

    def mi(d, n):
        d %= n
        return d - n if d > n // 2 else d

    def c(s, t):
        dx, dy = mi(s[0] - t[0], nx) * a, mi(s[1] - t[1], ny) * a
        J, G = coupling_rates([dx, dy, 0], [0, 0, 0], spec.polarization)
        return J - 0.5j * G

    latt = [s for s in sites if s not in imp]
    n = len(latt)
    H = np.empty((n, n), dtype=complex)
    for i, s in enumerate(latt):
        for j, t in enumerate(latt):
            H[i, j] = spec.delta_LI - 0.5j if i == j else c(s, t)
    g1, g2 = spec.gamma_1, spec.gamma_2
    C1 = np.array([c(s, imp[0]) for s in latt]) * np.sqrt(g1)
    C2 = np.array([c(s, imp[1]) for s in latt]) * np.sqrt(g2)
    J, G = coupling_rates(geom.impurity_positions[0], geom.impurity_positions[1], spec.polarization)
    g = np.sqrt(g1 * g2)
    inv = np.linalg.inv(H)
    return (-(C1 @ inv @ C1) / g1, -(C2 @ inv @ C2) / g2,
            (g * (J - 0.5j * G) - C1 @ inv @ C2) / g)


@pytest.mark.parametrize("nx,ny,pol,delta", [(6, 6, (0, 0, 1), 0.0), (5, 4, (0, 0, 1), 0.3),
                                             (8, 6, (1, 0, 0), -0.5)])
def test_momentum_route_equals_periodic_bath(nx, ny, pol, delta):
    spec = LatticeSpec(nx=nx, ny=ny, polarization=pol, delta_LI=delta)
    p = eliminate_momentum_space(spec)
    s1, s2, k = brute_force_torus(spec)
    assert p.sigma1 == pytest.approx(s1, rel=1e-10)
    assert p.sigma2 == pytest.approx(s2, rel=1e-10)
    assert p.kappa1 == pytest.approx(k, rel=1e-10)
    assert p.kappa2 == pytest.approx(k, rel=1e-10)


def test_momentum_route_rejects_disorder(geom):
    with pytest.raises(GeometryError, match="Bloch"):
        eliminate_momentum_space(apply_disorder(geom, 0.01, seed=1))


def test_momentum_real_discrepancy_reported():
    out = momentum_real_discrepancy(LatticeSpec(), sizes=(6, 8))
    assert [n for n, _ in out] == [6, 8]
    assert all(np.isfinite(d) for _, d in out)


def test_conditioning_error(geom):
    bath = build_bath(geom)
    singular = replace(bath, H_L=np.zeros_like(bath.H_L))
    with pytest.raises(ConditioningError) as exc:
        eliminate_real_space(singular, 0.01, 0.01)
    assert "cond" in str(exc.value)


def test_adiabaticity_warning():
    with pytest.warns(UserWarning, match="adiabatic"):
        params_from_spec(LatticeSpec(nx=4, ny=4, gamma_1=0.5, gamma_2=0.5))


def test_record_round_trip(params):
    rec = {k: format(v, ".17g") for k, v in params.to_record().items()}
    assert EffectiveParams.from_record(rec) == params


def test_physicality_flags(params):
    assert params.is_physical(0.0)
    bad = replace(params, sigma1=params.sigma1 + 0.1j, sigma2=params.sigma2 + 0.1j)
    flags = bad.physicality(0.0)
    assert not flags["im_sigma"] and not flags["gamma_coop"]


def test_derived_quantities(params):
    assert params.gamma_coop == pytest.approx(1 - params.sigma1.imag - params.sigma2.imag)
    R = params.with_ratio(4.0)
    assert R.delta0 == pytest.approx(R.gamma1 * params.sigma1.real - R.gamma2 * params.sigma2.real)
    assert R.g == pytest.approx(params.g)
