"""Parameter scans, protocol optimisation, optimal-R study and exceptional points.

Scan and optimum records are reported in units of g = sqrt(gamma1 gamma2):
frequencies and sigma divided by g, times multiplied by g.
"""

import io
import math
from dataclasses import dataclass, field, replace

import mpmath as mp
import numpy as np
from scipy.optimize import minimize

from ._parallel import parallel_map
from .dynamics import quasi_rabi
from .effective_model import params_from_spec
from .errors import OptimizationError, UnphysicalError
from .sensing import minimize_sigma, search_window, sigma_landscape

AXIS_NAMES = ("a", "Delta_add", "t0", "R", "sigma_pos")
RESULT_KEYS = ("sigma", "gamma_coop", "re_S", "im_S", "p")


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    count: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError(f"unknown axis {self.name!r}")
        if self.count < 1 or not self.max >= self.min:
            raise ValueError(f"bad axis range for {self.name}")
        if self.spacing not in ("linear", "log"):
            raise ValueError("spacing must be 'linear' or 'log'")

    def values(self):
        if self.spacing == "log":
            return np.geomspace(self.min, self.max, self.count)
        return np.linspace(self.min, self.max, self.count)

    @classmethod
    def from_values(cls, name, vals, spacing="linear"):
        vals = np.asarray(vals, dtype=float)
        return cls(name, float(vals[0]), float(vals[-1]), int(vals.size), spacing)


@dataclass(eq=False)
class ScanGrid:
    axes: list
    coords: list
    results: dict
    flags: np.ndarray

    def __post_init__(self):
        shape = tuple(len(c) for c in self.coords)
        for c in self.coords:
            if len(c) > 1 and not (np.all(np.diff(c) > 0) or np.all(np.diff(c) < 0)):
                raise ValueError("scan axes must be monotone")
        for k, v in self.results.items():
            if v.shape != shape:
                raise ValueError(f"result {k} has shape {v.shape}, expected {shape}")

    @property
    def shape(self):
        return tuple(len(c) for c in self.coords)

    def to_table(self):
        names = [ax.name for ax in self.axes]
        out = io.StringIO()
        out.write(",".join(names + list(RESULT_KEYS) + ["flag"]) + "\n")
        for idx in np.ndindex(*self.shape):
            vals = [self.coords[d][i] for d, i in enumerate(idx)]
            vals += [self.results[k][idx] for k in RESULT_KEYS]
            out.write(",".join(format(float(v), ".17g") for v in vals) + "," + self.flags[idx] + "\n")
        return out.getvalue()


@dataclass
class Optimum:
    a: float
    Delta_add: float
    t0: float
    R: float
    sigma: float
    trace: list = field(default_factory=list)
    n_eval: int = 0
    converged: bool = False
    seed_sigma: float = math.inf

    def to_record(self):
        rec = {"a": self.a, "Delta_add": self.Delta_add, "t0": self.t0, "R": self.R,
               "sigma": self.sigma, "seed_sigma": self.seed_sigma,
               "n_eval": self.n_eval, "converged": self.converged}
        return rec

    def to_table(self):
        out = io.StringIO()
        out.write("key,value\n")
        for k, v in self.to_record().items():
            out.write(f"{k},{format(float(v), '.17g') if isinstance(v, float) else v}\n")
        out.write("trace_index,best_sigma\n")
        for i, v in enumerate(self.trace):
            out.write(f"{i},{format(float(v), '.17g')}\n")
        return out.getvalue()


# --------------------------------------------------------------------------
# spacing scan (cooperativity, quasi-Rabi frequency, optimal sigma vs a)
# --------------------------------------------------------------------------

def _spacing_point(spec, a, n_delta, n_t):
    p = params_from_spec(spec.with_spacing(float(a)))
    g = p.g
    s = complex(quasi_rabi(p, 0.0))
    row = {"gamma_coop": p.gamma_coop, "re_S": s.real / g, "im_S": s.imag / g,
           "sigma": math.nan, "p": math.nan}
    if not p.is_physical(0.0):
        return row, "unphysical"
    op = minimize_sigma(p, n_delta=n_delta, n_t=n_t)
    row["sigma"], row["p"] = op.sigma / g, op.p
    return row, ("inf" if math.isinf(op.sigma) else "")


def scan_spacing(spec, a_grid, n_delta=41, n_t=41, threads=1):
    """Gamma_coop, Re S~, Im S~ (Delta = 0) and min sigma~ per spacing (d/a fixed).

    Unphysical spacings are kept in the table with flag ``unphysical`` and a
    NaN sigma.  ``re_S`` and ``im_S`` are in units of g; plot 2 im_S for the
    decay-condition comparison.
    """
    a_grid = np.asarray(a_grid, dtype=float)
    rows = parallel_map(lambda a: _spacing_point(spec, a, n_delta, n_t), a_grid, threads)
    res = {k: np.array([r[0][k] for r in rows]) for k in RESULT_KEYS}
    flags = np.array([r[1] for r in rows], dtype=object)
    return ScanGrid([Axis.from_values("a", a_grid)], [a_grid], res, flags)


def optimal_spacing(grid):
    """a of the smallest finite sigma in a spacing scan."""
    sig = np.where(grid.flags == "", grid.results["sigma"], np.inf)
    if not np.any(np.isfinite(sig)):
        raise OptimizationError("no physical point in the spacing scan")
    return float(grid.coords[0][int(np.argmin(sig))])


# --------------------------------------------------------------------------
# sigma landscape over (t0, Delta_add)
# --------------------------------------------------------------------------

def sigma_heatmap(p, t0_grid, Delta_add_grid):
    """sigma over t0 x Delta_add (physical inputs, tilde-unit record).

    Zero-slope cells hold +inf with flag ``inf``; they trace the ridges.
    """
    g = p.g
    t0_grid = np.asarray(t0_grid, dtype=float)
    D = np.asarray(Delta_add_grid, dtype=float)
    sig, pop, _ = sigma_landscape(p, D, t0_grid)
    sig, pop = sig.T, pop.T
    s = np.asarray(quasi_rabi(p, D))
    re_s = np.broadcast_to(s.real / g, sig.shape).copy()
    im_s = np.broadcast_to(s.imag / g, sig.shape).copy()
    gc = np.full(sig.shape, p.gamma_coop)
    flags = np.where(np.isinf(sig), "inf", np.where(np.isnan(sig), "unphysical", "")).astype(object)
    res = {"sigma": sig / g, "gamma_coop": gc, "re_S": re_s, "im_S": im_s, "p": pop}
    tt, dd = t0_grid * g, D / g
    return ScanGrid([Axis.from_values("t0", tt), Axis.from_values("Delta_add", dd)],
                    [tt, dd], res, flags)


def find_ridges(p, Delta_add, t0_grid):
    """Divergence ridges of sigma along t0 at fixed Delta_add.

    A ridge sits where dp/dDelta changes sign between neighbouring t0 cells.
    Each ridge is labelled ``broad`` if the population there is at least half
    the largest population between its neighbouring ridges (a transfer peak)
    and ``narrow`` otherwise (a transfer node).
    Returns a list of (t0, kind) in physical time.
    """
    t = np.asarray(t0_grid, dtype=float)
    _, pop, dp = sigma_landscape(p, [Delta_add], t)
    pop, dp = pop[0], dp[0]
    idx = []
    for i in np.nonzero(np.sign(dp[:-1]) * np.sign(dp[1:]) <= 0)[0]:
        idx.append(i if abs(dp[i]) <= abs(dp[i + 1]) else i + 1)
    out = []
    for n, j in enumerate(idx):
        lo = idx[n - 1] if n > 0 else 0
        hi = idx[n + 1] if n + 1 < len(idx) else t.size - 1
        local = float(np.max(pop[lo:hi + 1]))
        kind = "broad" if pop[j] >= 0.5 * local else "narrow"
        out.append((float(t[j]), kind))
    return out


# --------------------------------------------------------------------------
# protocol optimisation over (a, Delta_add, t0[, R])
# --------------------------------------------------------------------------

DEFAULT_BOUNDS = {"a": (0.08, 0.45), "R": (0.1, 10.0)}


class _Objective:
    """log sigma~ in normalised coordinates; window recomputed per (a, R)."""

    def __init__(self, spec, release_R):
        self.spec = spec
        self.release_R = release_R
        self.cache = {}
        self.n_eval = 0
        self.best = math.inf
        self.best_x = None
        self.trace = []

    def params(self, a, R):
        key = (float(a), float(R))
        if key not in self.cache:
            try:
                p = params_from_spec(self.spec.with_spacing(float(a))).with_ratio(float(R))
                ok = p.is_physical(p.delta0)
                win = search_window(p) if ok else None
            except (UnphysicalError, np.linalg.LinAlgError):
                p, win = None, None
            self.cache[key] = (p, win)
        return self.cache[key]

    def decode(self, x):
        a = x[0]
        R = math.exp(x[3]) if self.release_R else 1.0
        p, win = self.params(a, R)
        if win is None:
            return None, None, None, R
        (d_lo, d_hi), (t_lo, t_hi) = win
        d = 0.5 * (d_lo + d_hi) + 0.5 * (d_hi - d_lo) * x[1]
        t0 = math.exp(math.log(t_lo) + (math.log(t_hi) - math.log(t_lo)) * x[2])
        return p, d, t0, R

    def sigma_tilde(self, x):
        p, d, t0, _ = self.decode(x)
        if p is None:
            return math.inf
        s = float(sigma_landscape(p, [d], [t0])[0][0, 0])
        return s / p.g if s == s else math.inf

    def __call__(self, x):
        self.n_eval += 1
        s = self.sigma_tilde(x)
        val = math.log(s) if 0 < s < math.inf else math.inf
        if val < self.best:
            self.best, self.best_x = val, np.array(x, dtype=float)
        self.trace.append(math.exp(self.best) if math.isfinite(self.best) else math.inf)
        return val


def optimize_protocol(spec, bounds=None, seed=0, release_R=False, n_grid=21, n_starts=3,
                      threads=1):
    """Coarse multistart grid then bounded Nelder-Mead.

    Coordinates: a, normalised Delta_add in [-1, 1] across the search window,
    normalised log t0 in [0, 1] and, with ``release_R``, log R.  Local searches
    start from the ``n_starts`` best grid cells plus one seeded random point.
    """
    bounds = {**DEFAULT_BOUNDS, **(bounds or {})}
    obj = _Objective(spec, release_R)
    a_vals = np.linspace(*bounds["a"], n_grid)
    u_vals = np.linspace(-1.0, 1.0, n_grid)
    v_vals = np.linspace(0.0, 1.0, n_grid)
    r_vals = np.geomspace(*bounds["R"], n_grid) if release_R else np.array([1.0])
    # make R = 1 a grid value when it lies in range
    if release_R and bounds["R"][0] < 1 < bounds["R"][1]:
        r_vals = np.unique(np.append(r_vals, 1.0))

    def coarse(a):
        best = []
        for R in r_vals:
            p, win = obj.params(a, R)
            if win is None:
                continue
            (d_lo, d_hi), (t_lo, t_hi) = win
            D = 0.5 * (d_lo + d_hi) + 0.5 * (d_hi - d_lo) * u_vals
            T = np.exp(math.log(t_lo) + (math.log(t_hi) - math.log(t_lo)) * v_vals)
            sig = sigma_landscape(p, D, T)[0] / p.g
            sig = np.where(np.isfinite(sig), sig, np.inf)
            for i, j in zip(*np.unravel_index(np.argsort(sig, axis=None)[:n_starts], sig.shape)):
                best.append((float(sig[i, j]), a, u_vals[i], v_vals[j], math.log(R)))
        return best

    for a in a_vals:
        obj.params(a, 1.0)
    cells = [c for chunk in parallel_map(coarse, a_vals, threads) for c in chunk]
    cells = [c for c in cells if math.isfinite(c[0])]
    if not cells:
        raise OptimizationError("no physical point inside the optimisation bounds")
    cells.sort(key=lambda c: c[0])
    seed_sigma = cells[0][0]

    lo = [bounds["a"][0], -1.0, 0.0] + ([math.log(bounds["R"][0])] if release_R else [])
    hi = [bounds["a"][1], 1.0, 1.0] + ([math.log(bounds["R"][1])] if release_R else [])
    starts = [np.array(c[1:4] + ((c[4],) if release_R else ())) for c in cells[:n_starts]]
    rng = np.random.default_rng(seed)
    starts.append(rng.uniform(lo, hi))
    obj(starts[0])
    converged = False
    for x0 in starts:
        res = minimize(obj, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 3000,
                                "maxfev": 6000, "adaptive": release_R})
        converged = converged or bool(res.success)
    p, d, t0, R = obj.decode(obj.best_x)
    return Optimum(a=float(obj.best_x[0]), Delta_add=d / p.g, t0=t0 * p.g, R=R,
                   sigma=math.exp(obj.best), trace=obj.trace, n_eval=obj.n_eval,
                   converged=converged, seed_sigma=seed_sigma)


# --------------------------------------------------------------------------
# optimal impurity decay ratio
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RScan:
    R: np.ndarray
    sigma: np.ndarray
    delta_add: np.ndarray
    t0: np.ndarray

    def argmin_R(self):
        return float(self.R[int(np.argmin(self.sigma))])

    def reciprocal_error(self):
        """Largest relative |sigma(r) - sigma(1/r)| over reciprocal pairs in the grid."""
        worst = 0.0
        for i, r in enumerate(self.R):
            j = np.nonzero(np.isclose(self.R, 1.0 / r, rtol=1e-12))[0]
            if j.size:
                worst = max(worst, abs(self.sigma[i] - self.sigma[j[0]]) / self.sigma[i])
        return worst

    def to_table(self):
        out = io.StringIO()
        out.write("R,sigma,delta_add,t0\n")
        for row in zip(self.R, self.sigma, self.delta_add, self.t0):
            out.write(",".join(format(float(v), ".17g") for v in row) + "\n")
        return out.getvalue()


def scan_R(p, R_grid, n_delta=41, n_t=41, threads=1):
    """sigma~ minimised over (Delta_add, t0) at each R (fixed sqrt(gamma1 gamma2)).

    Uses the mean self-energy and coupling of the two impurities, so the
    reflection R -> 1/R, Delta - Delta0 -> Delta0 - Delta is exact.
    """
    ps = p.symmetrized()
    R_grid = np.asarray(R_grid, dtype=float)
    ops = parallel_map(lambda R: minimize_sigma(ps.with_ratio(float(R)), n_delta, n_t),
                       R_grid, threads)
    g = p.g
    return RScan(R=R_grid, sigma=np.array([o.sigma / g for o in ops]),
                 delta_add=np.array([o.Delta_add / g for o in ops]),
                 t0=np.array([o.t0 * g for o in ops]))


# --------------------------------------------------------------------------
# exceptional points
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExceptionalPoint:
    R: float
    Delta: float
    residual: float
    residual_float: float
    splitting: float
    angle: float
    branch: int

    @property
    def params_note(self):
        return "R and Delta in units of gamma ratio and g"


def _mp_heff(p, x, delta):
    g = mp.mpf(p.g)
    s1, s2 = mp.mpc(p.sigma1), mp.mpc(p.sigma2)
    g1, g2 = g * x, g / x
    k1, k2 = mp.mpc(p.kappa1), mp.mpc(p.kappa2)
    return mp.matrix([[g1 * s1 - 0.5j * g1, g * k1],
                      [g * k2, delta + g2 * s2 - 0.5j * g2]])


def exceptional_point(p, branch=1, dps=40):
    """Decay ratio R and detuning Delta at which S = 0 (eigenvalues and vectors coalesce).

    At fixed g = sqrt(gamma1 gamma2) the condition S = 0 fixes both
    sqrt(R) (imaginary part) and Delta (real part).  The closed-form root is
    polished in ``dps``-digit arithmetic; ``residual`` is |S| there in units
    of g, ``splitting`` is |omega+ - omega-|/|omega+| from a high-precision
    eigensolve and ``angle`` the angle between the two eigenvectors.
    """
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    with mp.workdps(dps):
        g = mp.mpf(p.g)
        kap = mp.sqrt(mp.mpc(p.kappa1) * mp.mpc(p.kappa2))
        if mp.re(kap) < 0:
            kap = -kap
        al = mp.mpf(0.5) - mp.im(mp.mpc(p.sigma1))
        be = mp.mpf(0.5) - mp.im(mp.mpc(p.sigma2))
        if not (al > 0 and be > 0):
            raise UnphysicalError("Im Sigma >= 1/2: no decaying exceptional point")
        k = mp.re(kap)
        x0 = (-branch * k + mp.sqrt(k * k + al * be)) / al

        def s2(x, delta):
            h = _mp_heff(p, x, delta)
            return 0.25 * (h[0, 0] - h[1, 1]) ** 2 + h[0, 1] * h[1, 0]

        h0 = _mp_heff(p, x0, 0)
        d0 = mp.re(h0[0, 0] - h0[1, 1]) + branch * 2 * g * mp.im(kap)
        try:
            x, delta = mp.findroot(lambda xx, dd: (mp.re(s2(xx, dd)), mp.im(s2(xx, dd))),
                                   (x0, d0))
        except (ZeroDivisionError, ValueError) as exc:
            raise OptimizationError(f"exceptional-point polish failed: {exc}") from exc
        if not x > 0:
            raise OptimizationError("no exceptional point with positive decay ratio")
        h = _mp_heff(p, x, delta)
        S = mp.sqrt(s2(x, delta))
        ev, er = mp.eig(h)
        split = abs(ev[0] - ev[1]) / max(abs(ev[0]), abs(ev[1]))
        v = [mp.matrix([h[0, 1], w - h[0, 0]]) for w in (ev[0], ev[1])]
        ip = abs(sum(mp.conj(v[0][i]) * v[1][i] for i in range(2)))
        cosang = ip / (mp.norm(v[0]) * mp.norm(v[1]))
        angle = float(mp.acos(min(cosang, mp.mpf(1))))
        R = float(x * x)
        Delta = float(delta)
    pf = replace(p, gamma1=p.g * math.sqrt(R), gamma2=p.g / math.sqrt(R))
    res_float = float(abs(quasi_rabi(pf, Delta))) / p.g
    return ExceptionalPoint(R=R, Delta=Delta / p.g, residual=float(abs(S)) / p.g,
                            residual_float=res_float, splitting=float(split), angle=angle,
                            branch=branch)


def sigma_at_exceptional_point(p, ep):
    """Best sigma~ over t0 with the impurities tuned to the exceptional point."""
    pe = p.with_ratio(ep.R)
    d = ep.Delta * p.g
    (_, _), (t_lo, t_hi) = search_window(replace(pe, delta=d)) if pe.is_physical(d) else ((0, 0), (1e-3 / p.g, 1e3 / p.g))
    T = np.geomspace(t_lo, t_hi, 4001)
    sig = sigma_landscape(pe, [d], T)[0][0] / p.g
    return float(np.nanmin(sig))
