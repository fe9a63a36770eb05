"""Monte Carlo ensembles over positional disorder and direct parameter offsets.

``sigma_pos`` is given in units of the lattice spacing a.  Sigma values in
records and aggregates are in units of g = sqrt(gamma1 gamma2).
"""

import io
import math
from dataclasses import dataclass, replace

import numpy as np

from ._parallel import parallel_map
from .dynamics import quasi_rabi
from .effective_model import build_bath, eliminate_real_space, effective_params
from .errors import UnphysicalError
from .geometry import apply_disorder, build_lattice
from .sensing import minimize_sigma, operating_point, sigma_landscape

PARAM_KEYS = ("re_sigma1", "im_sigma1", "re_sigma2", "im_sigma2", "re_kappa", "im_kappa",
              "gamma_coop", "re_S", "im_S")
RECORD_HEADER = ("sigma_pos,realization,seed," + ",".join(PARAM_KEYS)
                 + ",sigma_standard,sigma_reopt,flag")


def child_seed(master, g, r):
    """64-bit seed for realization r at grid index g."""
    ss = np.random.SeedSequence(int(master), spawn_key=(int(g), int(r)))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Realization:
    grid_index: int
    sigma_pos: float
    realization: int
    seed: int
    values: tuple
    sigma_standard: float
    sigma_reopt: float
    flag: str

    def value(self, key):
        return self.values[PARAM_KEYS.index(key)]

    def row(self):
        nums = [self.sigma_pos, *self.values, self.sigma_standard, self.sigma_reopt]
        f = [format(float(v), ".17g") for v in nums]
        return ",".join([f[0], str(self.realization), str(self.seed), *f[1:]]) + "," + self.flag


def _param_values(p):
    s = complex(quasi_rabi(p, 0.0))
    return (p.sigma1.real, p.sigma1.imag, p.sigma2.real, p.sigma2.imag,
            p.kappa1.real, p.kappa1.imag, p.gamma_coop, s.real / p.g, s.imag / p.g)


def _physical(p):
    return p.is_physical(0.0) and p.is_physical(p.delta0)


@dataclass(eq=False)
class DisorderEnsemble:
    sigma_pos: np.ndarray
    n_real: int
    seed: int
    records: list
    clean_op: object = None

    def at(self, g):
        return [r for r in self.records if r.grid_index == g]

    def aggregates(self):
        """Per grid point: mean/std of parameters, median/IQR of sigma, rejected counts."""
        rows = []
        for g, s in enumerate(self.sigma_pos):
            recs = self.at(g)
            ok = [r for r in recs if r.flag == ""]
            row = {"sigma_pos": float(s), "n_real": len(recs), "n_rejected": len(recs) - len(ok)}
            for k in PARAM_KEYS:
                vals = np.array([r.value(k) for r in ok])
                # centred on the first value so identical records give exact mean, zero std
                dev = vals - vals[0] if vals.size else vals
                row[f"mean_{k}"] = float(vals[0] + dev.mean()) if vals.size else math.nan
                row[f"std_{k}"] = float(dev.std(ddof=1)) if vals.size >= 2 else math.nan
            for k in ("sigma_standard", "sigma_reopt"):
                vals = np.array([getattr(r, k) for r in ok])
                if vals.size:
                    q1, med, q3 = np.percentile(vals, [25, 50, 75])
                else:
                    q1 = med = q3 = math.nan
                row[f"median_{k}"], row[f"q1_{k}"], row[f"q3_{k}"] = float(med), float(q1), float(q3)
            rows.append(row)
        return rows

    def series(self, key):
        return np.array([row[key] for row in self.aggregates()])

    def records_table(self):
        return RECORD_HEADER + "\n" + "".join(r.row() + "\n" for r in self.records)

    def aggregate_table(self):
        rows = self.aggregates()
        keys = list(rows[0])
        out = io.StringIO()
        out.write(",".join(keys) + "\n")
        for row in rows:
            out.write(",".join(str(row[k]) if isinstance(row[k], int) else format(row[k], ".17g")
                               for k in keys) + "\n")
        return out.getvalue()


def clean_optimum(spec, n_delta=41, n_t=41):
    """(params, operating point) of the undisordered lattice."""
    p = effective_params(build_lattice(spec))
    return p, minimize_sigma(p, n_delta, n_t)


def _sigma_at(p, Delta_add, t0):
    s = float(sigma_landscape(p, [Delta_add], [t0])[0][0, 0])
    return s if s == s else math.inf


def _reoptimize(p, frozen, n_delta, n_t):
    best = minimize_sigma(p, n_delta, n_t)
    s_frozen = _sigma_at(p, frozen.Delta_add, frozen.t0)
    return min(best.sigma, s_frozen)


def ensemble_stats(spec, sigma_pos_grid, n_real, seed, reoptimize=True, n_delta=21, n_t=21,
                   threads=1):
    """Disordered realizations per grid point, eliminated in real space.

    Each realization uses its own child seed, so records do not depend on the
    other grid points or on the thread count.  Unphysical realizations keep a
    ``unphysical`` flag and are excluded from the aggregates.
    """
    if n_real < 1:
        raise ValueError("n_real must be >= 1")
    base = build_lattice(spec)
    _, op = clean_optimum(spec, 41, 41)
    a = spec.spacing
    grid = np.asarray(sigma_pos_grid, dtype=float)
    tasks = [(g, float(s), r) for g, s in enumerate(grid) for r in range(n_real)]

    def run(task):
        g, s, r = task
        cs = child_seed(seed, g, r)
        geom = apply_disorder(base, s * a, cs)
        p = eliminate_real_space(build_bath(geom), geom.gamma_1, geom.gamma_2)
        vals = _param_values(p)
        if not _physical(p):
            return Realization(g, s, r, cs, vals, math.nan, math.nan, "unphysical")
        try:
            s_std = _sigma_at(p, op.Delta_add, op.t0) / p.g
            s_re = _reoptimize(p, op, n_delta, n_t) / p.g if reoptimize else math.nan
        except UnphysicalError:
            return Realization(g, s, r, cs, vals, math.nan, math.nan, "optimizer_failed")
        return Realization(g, s, r, cs, vals, s_std, s_re, "")

    records = parallel_map(run, tasks, threads)
    return DisorderEnsemble(sigma_pos=grid, n_real=n_real, seed=seed, records=records,
                            clean_op=op)


def sigma_vs_disorder(spec, sigma_pos_grid, n_real, seed, threads=1):
    """Median and interquartile sigma~ at frozen and re-optimised operating points."""
    ens = ensemble_stats(spec, sigma_pos_grid, n_real, seed, reoptimize=True, threads=threads)
    agg = ens.aggregates()
    curves = {k: np.array([row[k] for row in agg]) for k in
              ("median_sigma_standard", "q1_sigma_standard", "q3_sigma_standard",
               "median_sigma_reopt", "q1_sigma_reopt", "q3_sigma_reopt")}
    return ens, curves


def free_space_params(spec):
    geom = build_lattice(spec)
    bare = replace(geom, lattice_positions=np.zeros((0, 3)),
                   lattice_sites=np.zeros((0, 2), dtype=int))
    return eliminate_real_space(build_bath(bare), geom.gamma_1, geom.gamma_2)


def free_space_baseline(spec, n_delta=41, n_t=41):
    """The impurity pair alone (no lattice): params and optimal sigma~."""
    p = free_space_params(spec)
    return p, minimize_sigma(p, n_delta, n_t).sigma / p.g


# --------------------------------------------------------------------------
# direct perturbations of the effective parameters
# --------------------------------------------------------------------------

PERTURBATIONS = ("re_kappa", "im_kappa", "re_sigma", "im_sigma")


def perturb(p, which, offset):
    """Add ``offset`` to the named component on both impurities (both couplings)."""
    if which == "re_sigma":
        return replace(p, sigma1=p.sigma1 + offset, sigma2=p.sigma2 + offset)
    if which == "im_sigma":
        return replace(p, sigma1=p.sigma1 + 1j * offset, sigma2=p.sigma2 + 1j * offset)
    if which == "re_kappa":
        return replace(p, kappa1=p.kappa1 + offset, kappa2=p.kappa2 + offset)
    if which == "im_kappa":
        return replace(p, kappa1=p.kappa1 + 1j * offset, kappa2=p.kappa2 + 1j * offset)
    raise ValueError(f"unknown perturbation {which!r}; expected one of {PERTURBATIONS}")


PERTURB_HEADER = "which,offset,gamma_coop,re_S,im_S,sigma_frozen,sigma_reopt,flag"


def perturbation_sweep(p, which, offsets, op=None, n_delta=41, n_t=41):
    """sigma~ vs offset at the frozen clean operating point and re-optimised.

    Returns a list of dict rows (PERTURB_HEADER keys).  S is evaluated at the
    perturbed Delta0.
    """
    if op is None:
        op = minimize_sigma(p, n_delta, n_t)
    rows = []
    for off in offsets:
        q = perturb(p, which, float(off))
        s = complex(quasi_rabi(q, q.delta0))
        row = {"which": which, "offset": float(off), "gamma_coop": q.gamma_coop,
               "re_S": s.real / q.g, "im_S": s.imag / q.g,
               "sigma_frozen": math.nan, "sigma_reopt": math.nan, "flag": ""}
        if not _physical(q):
            row["flag"] = "unphysical"
        else:
            row["sigma_frozen"] = operating_point(q, op.Delta_add, op.t0).sigma / q.g
            row["sigma_reopt"] = _reoptimize(q, op, n_delta, n_t) / q.g
        rows.append(row)
    return rows


def perturbation_table(rows):
    out = io.StringIO()
    out.write(PERTURB_HEADER + "\n")
    for r in rows:
        nums = [r[k] for k in ("offset", "gamma_coop", "re_S", "im_S", "sigma_frozen", "sigma_reopt")]
        out.write(r["which"] + "," + ",".join(format(float(v), ".17g") for v in nums)
                  + "," + r["flag"] + "\n")
    return out.getvalue()
