"""Impurity population dynamics: closed form, exact 2x2 propagation and full ODE.

Times passed to these functions are physical (units of 1/gamma_L).
``PopulationTrace.to_table`` reports them in units of 1/sqrt(gamma1 gamma2).
The initial state is always impurity 2 excited, c(0) = (0, 1).
"""

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .effective_model import full_hamiltonian
from .errors import IntegrationError, UnphysicalError

_SMALL_X = 1e-2
EIG_COND_MAX = 1e8


@dataclass(frozen=True)
class EigenData:
    S: complex
    omega_plus: complex
    omega_minus: complex
    Omega_bar: float
    Delta_quasi: complex
    decay: float

    def as_dict(self):
        return {"S": self.S, "omega_plus": self.omega_plus, "omega_minus": self.omega_minus,
                "Omega_bar": self.Omega_bar, "Delta_quasi": self.Delta_quasi}


@dataclass(frozen=True, eq=False)
class PopulationTrace:
    t: np.ndarray
    pop1: np.ndarray
    pop2: np.ndarray
    method: str
    g: float = 1.0

    @property
    def t_tilde(self):
        return self.t * self.g

    def to_table(self):
        out = io.StringIO()
        out.write("t,pop1,pop2,method\n")
        for row in zip(self.t_tilde, self.pop1, self.pop2):
            out.write(",".join(format(float(v), ".17g") for v in row) + "," + self.method + "\n")
        return out.getvalue()


def quasi_rabi(p, Delta):
    """S(Delta) on the principal branch (Re S >= 0)."""
    h11, h22, h12, h21 = p.generator()
    q = h11 - (h22 + Delta)
    return np.sqrt(0.25 * q * q + h12 * h21 + 0j)


def eigen_data(p, Delta):
    h = p.heff(Delta)
    tr = h[0, 0] + h[1, 1]
    s = complex(quasi_rabi(p, Delta))
    return EigenData(S=s, omega_plus=0.5 * tr + s, omega_minus=0.5 * tr - s,
                     Omega_bar=float(0.5 * tr.real), Delta_quasi=complex(h[0, 0] - h[1, 1]),
                     decay=float(-tr.imag))


def _decay(p, Delta):
    h = p.heff(Delta)
    return float(-(h[0, 0] + h[1, 1]).imag)


def population_closed_form(p, Delta, t, check=True):
    """|c1(t)|^2 = |h12|^2/(2|S|^2) e^{-gamma t}[cosh(2t Im S) - cos(2t Re S)].

    gamma = -Im tr(H_eff) (= gamma_bar Gamma_coop for equal self-energies).
    At |S t| < 1e-2 the bracket is replaced by its series, which tends to
    the exceptional-point limit |h12|^2 t^2 e^{-gamma t}.
    """
    t = np.asarray(t, dtype=float)
    s = complex(quasi_rabi(p, Delta))
    gam = _decay(p, Delta)
    if check and not gam > 2.0 * abs(s.imag):
        raise UnphysicalError(f"decay {gam:.6g} <= 2|Im S| = {2 * abs(s.imag):.6g}; "
                              "population grows without bound")
    h12 = p.g * p.kappa1
    amp = abs(h12) ** 2
    a, b = abs(s.imag), s.real
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        cosh_d = 0.5 * (np.exp((2 * a - gam) * t) + np.exp((-2 * a - gam) * t))
        big = np.divide(amp, 2 * np.float64(abs(s)) ** 2) * (cosh_d - np.cos(2 * b * t) * np.exp(-gam * t))
    x = s * t
    x2 = x * x
    sinc = 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    small = amp * t**2 * np.abs(sinc) ** 2 * np.exp(-gam * t)
    return np.where(np.abs(x) < _SMALL_X, small, big)


def _sylvester_propagate(h, t, c0):
    """e^{-iHt} c0 for 2x2 H via cos(St) and sin(St)/S (finite at S = 0)."""
    m = 0.5 * (h[0, 0] + h[1, 1])
    s = np.sqrt(0.25 * (h[0, 0] - h[1, 1]) ** 2 + h[0, 1] * h[1, 0] + 0j)
    t = np.asarray(t, dtype=float)
    x = s * t
    x2 = x * x
    with np.errstate(divide="ignore", invalid="ignore"):
        sinc_big = np.sin(x) / s
    sinc = np.where(np.abs(x) < _SMALL_X, t * (1 - x2 / 6 + x2 * x2 / 120), sinc_big)
    cos = np.cos(x)
    phase = np.exp(-1j * m * t)
    hm = h - m * np.eye(2)
    v = hm @ c0
    c = phase[None, :] * (cos[None, :] * c0[:, None] - 1j * sinc[None, :] * v[:, None])
    return c


def evolve_2x2(p, Delta, t_grid):
    """Exact 2x2 evolution by eigendecomposition (valid for Sigma1 != Sigma2).

    Close to an exceptional point the eigenvector matrix is ill conditioned and
    the cos/sinc propagator is used instead; at S = 0 it reduces to the
    Jordan-form (linear in t) result.
    """
    t = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t) < 0) or np.any(t < 0):
        raise ValueError("t_grid must be sorted and non-negative")
    h = p.heff(Delta)
    c0 = np.array([0.0, 1.0], dtype=complex)
    w, V = np.linalg.eig(h)
    if np.linalg.cond(V) > EIG_COND_MAX:
        c = _sylvester_propagate(h, t, c0)
        method = "eigen_2x2_jordan"
    else:
        coef = np.linalg.solve(V, c0)
        c = V @ (coef[:, None] * np.exp(-1j * np.outer(w, t)))
        method = "eigen_2x2"
    c[:, t == 0] = c0[:, None]
    pops = np.abs(c) ** 2
    return PopulationTrace(t=t, pop1=pops[0], pop2=pops[1], method=method, g=p.g)


def evolve_full(geom, Delta, t_grid, rtol=1e-9, atol=1e-12, method="DOP853"):
    """Integrate all l+2 amplitudes of the single-excitation sector."""
    t = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t) < 0) or np.any(t < 0):
        raise ValueError("t_grid must be sorted and non-negative")
    if not (rtol > 0 and atol > 0):
        raise ValueError("rtol and atol must be positive")
    H = full_hamiltonian(geom, Delta)
    A = -1j * H
    n = H.shape[0]
    y0 = np.zeros(n, dtype=complex)
    y0[-1] = 1.0

    def rhs(_, y):
        return A @ y

    sol = solve_ivp(rhs, (0.0, float(t[-1])), y0, method=method, t_eval=t,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"ODE integration failed at t = {sol.t[-1] if sol.t.size else 0:.6g}: "
                               f"{sol.message} (nfev = {sol.nfev})")
    y = sol.y
    norm = np.sum(np.abs(y) ** 2, axis=0)
    if np.any(np.diff(norm) > 10 * rtol):
        k = int(np.argmax(np.diff(norm)))
        raise IntegrationError(f"excitation norm increased between t = {t[k]:.6g} and "
                               f"{t[k + 1]:.6g}; tighten tolerances")
    g = math.sqrt(geom.gamma_1 * geom.gamma_2)
    return PopulationTrace(t=t, pop1=np.abs(y[-2]) ** 2, pop2=np.abs(y[-1]) ** 2,
                           method="full_ode", g=g)


def _first_period(p, Delta):
    s = complex(quasi_rabi(p, Delta))
    if s.real > 1e-12 * p.g:
        return math.pi / s.real
    return 10.0 / max(_decay(p, Delta), 1e-300)


def peak_population(p, Delta, n_coarse=400):
    """(t_peak, p_peak): maximum of |c1|^2 over the first oscillation period."""
    T = _first_period(p, Delta)
    tg = np.linspace(0.0, T, n_coarse + 1)
    pg = population_closed_form(p, Delta, tg)
    k = int(np.argmax(pg))
    lo, hi = tg[max(k - 1, 0)], tg[min(k + 1, n_coarse)]
    res = minimize_scalar(lambda tt: -float(population_closed_form(p, Delta, tt)),
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * T})
    t_best, p_best = float(res.x), -float(res.fun)
    if pg[k] > p_best:
        t_best, p_best = float(tg[k]), float(pg[k])
    return t_best, p_best


def quasi_lorentzian(p, Delta):
    """|h12/S|^2 exp(-pi gamma / (2 Re S)): approximate peak height."""
    s = complex(quasi_rabi(p, Delta))
    if s.real <= 0:
        raise UnphysicalError("Re S = 0: quasi-Lorentzian peak height undefined")
    h12 = p.g * p.kappa1
    return abs(h12 / s) ** 2 * math.exp(-math.pi * _decay(p, Delta) / (2 * s.real))
