import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arrayqed import _kernels
from arrayqed.errors import SingularityError
from arrayqed.greens import K0, coupling_matrix, coupling_rates, dissipative_matrix, green_tensor

Z = np.array([0, 0, 1.0])
X = np.array([1.0, 0, 0])


def perp_rates(r):
    """Textbook J, Gamma for parallel dipoles perpendicular to their separation."""
    x = K0 * r
    J = -0.75 * (np.cos(x) / x - np.sin(x) / x**2 - np.cos(x) / x**3)
    G = 1.5 * (np.sin(x) / x + np.cos(x) / x**2 - np.sin(x) / x**3)
    return J, G


def para_rates(r):
    """Same for dipoles along the separation axis."""
    x = K0 * r
    J = -1.5 * (np.sin(x) / x**2 + np.cos(x) / x**3)
    G = 3.0 * (np.sin(x) / x**3 - np.cos(x) / x**2)
    return J, G


@pytest.mark.parametrize("r", [0.05, 0.3, 0.6, 1.7])
def test_rates_match_closed_forms(r):
    J, G = coupling_rates([r, 0, 0], [0, 0, 0], Z)
    Jo, Go = perp_rates(r)
    assert J == pytest.approx(Jo, rel=1e-12, abs=1e-14)
    assert G == pytest.approx(Go, rel=1e-12, abs=1e-14)
    J, G = coupling_rates([r, 0, 0], [0, 0, 0], X)
    Jo, Go = para_rates(r)
    assert J == pytest.approx(Jo, rel=1e-12, abs=1e-14)
    assert G == pytest.approx(Go, rel=1e-12, abs=1e-14)


def test_gamma_tends_to_bare_rate():
    for d in (Z, X, np.array([1, 1j, 0]) / np.sqrt(2)):
        _, G = coupling_rates([1e-5, 0, 0], [0, 0, 0], d)
        assert np.real(G) == pytest.approx(1.0, abs=1e-6)


def test_rates_scale_with_sqrt_decay_product():
    J1, G1 = coupling_rates([0.3, 0, 0], [0, 0, 0], Z)
    J2, G2 = coupling_rates([0.3, 0, 0], [0, 0, 0], Z, gi=0.04, gj=0.01)
    assert J2 == pytest.approx(0.02 * J1, rel=1e-14)
    assert G2 == pytest.approx(0.02 * G1, rel=1e-14)


def test_singular_at_origin():
    with pytest.raises(SingularityError):
        green_tensor([0, 0, 0])
    with pytest.raises(SingularityError):
        coupling_rates([1, 2, 3], [1, 2, 3], Z)


def test_matrix_matches_pair_rates():
    pos = np.array([[0, 0, 0], [0.3, 0, 0], [0.1, 0.4, 0.0]])
    c = coupling_matrix(pos, Z)
    J, G = coupling_rates(pos[2], pos[1], Z)
    assert c[2, 1] == pytest.approx(J - 0.5j * G, rel=1e-13)
    assert np.all(np.diag(c) == 0)


points = st.lists(st.tuples(*[st.floats(-2, 2)] * 3), min_size=2, max_size=12, unique=True)


def _well_separated(p):
    p = np.array(p)
    d = np.linalg.norm(p[:, None] - p[None], axis=-1)
    np.fill_diagonal(d, 1)
    return d.min() > 1e-2


@settings(max_examples=40, deadline=None)
@given(points.filter(_well_separated))
def test_coupling_complex_symmetric(pts):
    c = coupling_matrix(np.array(pts), Z)
    assert np.allclose(c, c.T, rtol=1e-13, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(points.filter(_well_separated))
def test_dissipative_matrix_psd(pts):
    gam = dissipative_matrix(np.array(pts), Z)
    w = np.linalg.eigvalsh(gam)
    assert w.min() > -1e-9 * max(1.0, w.max())


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba unavailable")
@settings(max_examples=30, deadline=None)
@given(points.filter(_well_separated), st.sampled_from([Z, X, np.array([1, 1j, 0]) / np.sqrt(2)]))
def test_numba_and_numpy_coupling_agree(pts, d):
    a = _kernels.coupling_matrix_numpy(np.array(pts), d, K0)
    b = _kernels.coupling_matrix_numba(np.array(pts), d, K0)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)
