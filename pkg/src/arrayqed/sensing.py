"""Frequency-shift sensitivity from binomial readout of impurity 1.

A signal shift Delta_signal detunes impurity 2.  Reading out |c1(t0)|^2 with
n shots and inverting the local slope gives the single-shot standard
deviation sigma = sqrt(p(1-p)/n) / |dp/dDelta|.  Frequencies are physical
(units of gamma_L); report rows are in units of sqrt(gamma1 gamma2).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .dynamics import quasi_rabi
from .errors import UnphysicalError

P_TOL = 1e-12
LINEAR_TOL = 0.05
WINDOW_FRACTION = 0.1

REPORT_HEADER = "a,delta_add,t0,R,p,dp_dDelta,sigma,n_shots,flags"


@dataclass(frozen=True)
class OperatingPoint:
    Delta_add: float
    t0: float
    p: float
    dp_dDelta: float
    sigma: float
    n_shots: int = 1
    flags: tuple = ()

    def with_shots(self, n):
        return OperatingPoint(self.Delta_add, self.t0, self.p, self.dp_dDelta,
                              self.sigma * math.sqrt(self.n_shots / n), n, self.flags)

    def report_row(self, g, a=float("nan"), R=1.0):
        """Row of REPORT_HEADER in units of g = sqrt(gamma1 gamma2)."""
        vals = [a, self.Delta_add / g, self.t0 * g, R, self.p, self.dp_dDelta * g, self.sigma / g]
        s = ",".join(format(float(v), ".17g") for v in vals)
        return f"{s},{self.n_shots},{'|'.join(self.flags)}"


def response(p, Delta, t):
    """(|c1|^2, d|c1|^2/dDelta) at broadcast (Delta, t), analytic derivative."""
    h11, h22, h12, h21 = p.generator()
    return _kernels.two_level_response(h11, h22, h12, h21, Delta, t)


def population_derivative(p, Delta_add, t0):
    return float(response(p, Delta_add, t0)[1])


def _sigma_from(pop, dp, n_shots):
    var = np.clip(pop * (1.0 - pop), 0.0, None) / n_shots
    with np.errstate(divide="ignore", invalid="ignore"):
        sig = np.sqrt(var) / np.abs(dp)
    return np.where(dp == 0, np.inf, sig)


def sigma_signal(p, Delta_add, t0, n_shots=1):
    """sqrt(p(1-p)/n)/|dp/dDelta|; +inf when the slope vanishes."""
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    pop, dp = response(p, Delta_add, t0)
    pop, dp = float(pop), float(dp)
    if not (-P_TOL <= pop <= 1 + P_TOL):
        raise UnphysicalError(f"population {pop:.6g} outside [0, 1]")
    return float(_sigma_from(pop, dp, n_shots))


def sigma_from_population(pop, dp, n_shots=1):
    if not (-P_TOL <= pop <= 1 + P_TOL):
        raise UnphysicalError(f"population {pop:.6g} outside [0, 1]")
    return float(_sigma_from(np.float64(pop), np.float64(dp), n_shots))


def operating_point(p, Delta_add, t0, n_shots=1):
    pop, dp = (float(v) for v in response(p, Delta_add, t0))
    if not (-P_TOL <= pop <= 1 + P_TOL):
        raise UnphysicalError(f"population {pop:.6g} outside [0, 1]")
    sig = float(_sigma_from(pop, dp, n_shots))
    flags = ("diverged",) if math.isinf(sig) else ()
    return OperatingPoint(float(Delta_add), float(t0), pop, dp, sig, n_shots, flags)


def sigma_landscape(p, Delta_grid, t_grid, n_shots=1):
    """(sigma, pop, dp) on the outer grid Delta_grid x t_grid; inf marks zero slope."""
    D = np.asarray(Delta_grid, dtype=float)[:, None]
    T = np.asarray(t_grid, dtype=float)[None, :]
    pop, dp = response(p, D, T)
    sig = _sigma_from(pop, dp, n_shots)
    bad = (pop < -P_TOL) | (pop > 1 + P_TOL)
    sig = np.where(bad, np.nan, sig)
    return sig, pop, dp


def fisher_consistency(prob, n):
    """Bernoulli estimator variance and the Cramer-Rao bound n / (p(1-p)) inverted."""
    if not 0 < prob < 1:
        raise ValueError(f"p must lie strictly inside (0, 1), got {prob}")
    if n < 1:
        raise ValueError("n must be a positive integer")
    var = prob * (1 - prob) / n
    fisher = n / (prob * (1 - prob))
    crb = 1.0 / fisher
    if not math.isclose(var, crb, rel_tol=1e-12):
        raise AssertionError("estimator variance does not saturate the Cramer-Rao bound")
    return var, crb


def bernoulli_estimates(prob, n, batches, seed):
    """Sample-mean estimates p_hat over ``batches`` independent n-shot batches."""
    rng = np.random.default_rng(seed)
    return rng.binomial(n, prob, size=batches) / n


def variance_standard_error(prob, n, batches):
    """Standard error of the sample variance of p_hat over ``batches`` batches."""
    var = prob * (1 - prob)
    mu4 = n * var * (1 + 3 * (n - 2) * var) / n**4
    s4 = (var / n) ** 2
    return math.sqrt((mu4 - s4 * (batches - 3) / (batches - 1)) / batches)


def linear_window(p, Delta_add, t0, tol=LINEAR_TOL, fraction=WINDOW_FRACTION):
    """Half-width where the linearised population stays within ``tol`` relative.

    Returns ``fraction`` times the smallest |x| at which
    |p(Delta_add + x) - p0 - p' x| > tol |p' x| on either side.
    """
    pop0, dp0 = (float(v) for v in response(p, Delta_add, t0))
    if dp0 == 0:
        raise UnphysicalError("zero population slope: no linear window")
    scale = float(abs(quasi_rabi(p, Delta_add))) + p.g
    xs = scale * np.logspace(-6, 1, 701)
    worst = math.inf
    for sign in (1.0, -1.0):
        x = sign * xs
        pv = response(p, Delta_add + x, t0)[0]
        err = np.abs(pv - pop0 - dp0 * x) > tol * np.abs(dp0 * x)
        if np.any(err):
            worst = min(worst, xs[int(np.argmax(err))])
    if math.isinf(worst):
        worst = xs[-1]
    return fraction * worst


@dataclass(frozen=True, eq=False)
class MeasurementSample:
    estimates: np.ndarray
    true_signal: float
    window: float
    sigma_batch: float
    n_shots: int
    flags: np.ndarray = field(repr=False, default=None)

    @property
    def in_window(self):
        return abs(self.true_signal) <= self.window


def simulate_measurement(p, Delta_add, t0, Delta_signal, n_shots, n_batches, seed,
                         tol=LINEAR_TOL, fraction=WINDOW_FRACTION):
    """Draw n-shot batches at p(Delta_add + Delta_signal) and invert linearly.

    Each batch is an independent stream spawned from ``seed``.  ``flags`` marks
    estimates outside the linear-response window.
    """
    pop0, dp0 = (float(v) for v in response(p, Delta_add, t0))
    if dp0 == 0:
        raise UnphysicalError("zero population slope at the operating point")
    window = linear_window(p, Delta_add, t0, tol, fraction)
    prob = float(response(p, Delta_add + Delta_signal, t0)[0])
    if not (-P_TOL <= prob <= 1 + P_TOL):
        raise UnphysicalError(f"population {prob:.6g} outside [0, 1]")
    prob = min(max(prob, 0.0), 1.0)
    ss = np.random.SeedSequence(seed)
    k = np.array([np.random.default_rng(c).binomial(n_shots, prob) for c in ss.spawn(n_batches)])
    est = (k / n_shots - pop0) / dp0
    sig = sigma_signal(p, Delta_add, t0, n_shots)
    return MeasurementSample(estimates=est, true_signal=float(Delta_signal), window=window,
                             sigma_batch=sig, n_shots=n_shots, flags=np.abs(est) > window)


def search_window(p):
    """Default (Delta_add, t0) box for minimising sigma.

    Delta_add spans Delta0 +- 4(|S(Delta0)| + gamma/2), symmetric about Delta0;
    t0 runs up to four envelope decay times.
    """
    d0 = p.delta0
    s0 = complex(quasi_rabi(p, d0))
    h = p.heff(d0)
    gam = float(-(h[0, 0] + h[1, 1]).imag)
    half = 4.0 * (abs(s0) + 0.5 * gam)
    env = gam - 2.0 * abs(s0.imag)
    if not env > 0:
        raise UnphysicalError("non-decaying envelope: sigma search window undefined")
    t_hi = 4.0 / env
    return (d0 - half, d0 + half), (t_hi * 1e-3, t_hi)


def minimize_sigma(p, n_delta=41, n_t=41, delta_bounds=None, t_bounds=None, polish=True):
    """Grid search over (Delta_add, t0) then bounded Nelder-Mead on (Delta_add, log t0)."""
    db, tb = search_window(p)
    db = delta_bounds or db
    tb = t_bounds or tb
    D = np.linspace(db[0], db[1], n_delta)
    T = np.geomspace(tb[0], tb[1], n_t)
    sig, _, _ = sigma_landscape(p, D, T)
    sig = np.where(np.isfinite(sig), sig, np.inf)
    i, j = np.unravel_index(int(np.argmin(sig)), sig.shape)
    best = operating_point(p, D[i], T[j])
    if not polish or not math.isfinite(best.sigma):
        return best

    lt = (math.log(tb[0]), math.log(tb[1]))

    def obj(x):
        s = _sigma_from(*response(p, x[0], math.exp(x[1])), 1)
        s = float(s)
        return math.log(s) if 0 < s < math.inf else math.inf

    res = minimize(obj, np.array([D[i], math.log(T[j])]), method="Nelder-Mead",
                   bounds=[db, lt],
                   options={"xatol": 1e-12 * max(1.0, abs(D[i])), "fatol": 1e-15,
                            "maxiter": 4000, "maxfev": 8000})
    if res.fun < math.log(best.sigma):
        best = operating_point(p, float(res.x[0]), math.exp(float(res.x[1])))
    return best
