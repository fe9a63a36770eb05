import math

import numpy as np
import pytest

from arrayqed.dynamics import quasi_rabi
from arrayqed.effective_model import params_from_spec
from arrayqed.geometry import LatticeSpec
from arrayqed.sensing import minimize_sigma, sigma_signal
from arrayqed.sweeps import (Axis, ScanGrid, exceptional_point, find_ridges, optimize_protocol,
                             scan_R, scan_spacing, sigma_at_exceptional_point, sigma_heatmap)


def test_axis():
    assert np.allclose(Axis("a", 0.1, 0.3, 3).values(), [0.1, 0.2, 0.3])
    assert np.allclose(Axis("t0", 1, 100, 3, "log").values(), [1, 10, 100])
    for bad in (dict(name="b", min=0, max=1, count=2), dict(name="a", min=1, max=0, count=2),
                dict(name="a", min=0, max=1, count=0), dict(name="a", min=0, max=1, count=2, spacing="x")):
        with pytest.raises(ValueError):
            Axis(**bad)


def test_scan_grid_validation():
    res = {"sigma": np.zeros(3)}
    ScanGrid([Axis("a", 0, 1, 3)], [np.array([0, 0.5, 1])], res, np.array([""] * 3, dtype=object))
    with pytest.raises(ValueError):
        ScanGrid([Axis("a", 0, 1, 3)], [np.array([0, 1, 0.5])], res, None)
    with pytest.raises(ValueError):
        ScanGrid([Axis("a", 0, 1, 4)], [np.arange(4.0)], res, None)


def test_heatmap_symmetric_in_detuning(sym_params):
    p = sym_params
    T = np.geomspace(1, 300, 25) / p.g
    D = np.linspace(-2, 2, 21) * p.g
    grid = sigma_heatmap(p, T, D)
    sig = grid.results["sigma"]
    assert grid.shape == (25, 21)
    # the central column (Delta_add = 0) has zero slope
    assert np.all(grid.flags[:, 10] == "inf")
    fin = np.isfinite(sig[:, :10])
    assert np.allclose(sig[:, :10][fin], sig[:, :10:-1][fin], rtol=1e-9)


def test_heatmap_table_units(params):
    T = np.array([10.0, 20.0]) / params.g
    D = np.array([0.3]) * params.g
    grid = sigma_heatmap(params, T, D)
    lines = grid.to_table().strip().split("\n")
    assert lines[0] == "t0,Delta_add,sigma,gamma_coop,re_S,im_S,p,flag"
    row = lines[1].split(",")
    assert float(row[0]) == pytest.approx(10.0) and float(row[1]) == pytest.approx(0.3)
    assert float(row[2]) == pytest.approx(sigma_signal(params, D[0], T[0]) / params.g, rel=1e-12)


def test_ridges_alternate(params):
    d = params.delta0 + 0.5 * params.g
    T = np.linspace(1, 200, 3000) / params.g
    ridges = find_ridges(params, d, T)
    assert len(ridges) >= 3
    kinds = [k for _, k in ridges]
    # transfer nodes and transfer peaks take turns
    assert all(a != b for a, b in zip(kinds, kinds[1:]))
    # divergence ridges are where sigma blows up
    for t0, _ in ridges[:4]:
        near = [sigma_signal(params, d, t0 * f) for f in (0.97, 1.03)]
        assert sigma_signal(params, d, t0) > min(near)


def test_spacing_scan_flags_and_units():
    grid = scan_spacing(LatticeSpec(nx=6, ny=6), [0.1, 0.3], n_delta=11, n_t=11)
    assert grid.shape == (2,)
    ok = grid.flags == ""
    assert ok[1]
    p = params_from_spec(LatticeSpec(nx=6, ny=6))
    assert grid.results["gamma_coop"][1] == pytest.approx(p.gamma_coop, rel=1e-12)
    s = complex(quasi_rabi(p, 0.0))
    assert grid.results["re_S"][1] == pytest.approx(s.real / p.g, rel=1e-12)
    for i in np.nonzero(grid.flags == "unphysical")[0]:
        assert math.isnan(grid.results["sigma"][i])


@pytest.fixture(scope="module")
def small_opt():
    spec = LatticeSpec(nx=6, ny=6)
    return spec, optimize_protocol(spec, {"a": (0.2, 0.4)}, seed=3, n_grid=7, n_starts=2)


def test_optimizer_deterministic(small_opt):
    spec, a = small_opt
    b = optimize_protocol(spec, {"a": (0.2, 0.4)}, seed=3, n_grid=7, n_starts=2)
    assert a.to_table() == b.to_table()


def test_optimizer_improves_on_seed(small_opt):
    spec, opt = small_opt
    assert opt.sigma <= opt.seed_sigma
    assert np.all(np.diff(opt.trace) <= 0)
    assert 0.2 <= opt.a <= 0.4 and opt.R == 1.0
    p = params_from_spec(spec.with_spacing(opt.a))
    s = sigma_signal(p, opt.Delta_add * p.g, opt.t0 / p.g) / p.g
    assert s == pytest.approx(opt.sigma, rel=1e-10)


def test_scan_R_reciprocal(params):
    res = scan_R(params, [0.2, 0.5, 1.0, 2.0, 5.0], n_delta=21, n_t=21)
    assert res.reciprocal_error() < 1e-6
    ref = minimize_sigma(params.symmetrized(), 21, 21).sigma / params.g
    assert res.sigma[2] == pytest.approx(ref, rel=1e-12)
    assert res.to_table().startswith("R,sigma,delta_add,t0\n")


@pytest.mark.parametrize("branch", [1, -1])
def test_exceptional_point(params, branch):
    ep = exceptional_point(params, branch=branch)
    assert ep.R > 0 and ep.R != pytest.approx(1.0)
    assert ep.residual < 1e-15 and ep.residual_float < 1e-6
    assert ep.splitting < 1e-8 and ep.angle < 1e-4
    assert math.isfinite(sigma_at_exceptional_point(params, ep))


def test_exceptional_point_branches_reciprocal(sym_params):
    # equal self-energies: the two branches are related by R -> 1/R
    a = exceptional_point(sym_params, 1)
    b = exceptional_point(sym_params, -1)
    assert a.R * b.R == pytest.approx(1.0, rel=1e-10)
    with pytest.raises(ValueError):
        exceptional_point(sym_params, 0)
