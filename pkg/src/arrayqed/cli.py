"""Command-line front end.

Every command writes headered CSV tables and a ``manifest.json`` into the
output directory (``--out``, else ``$ARRAYQED_OUT/<command>``, else
``./arrayqed-out/<command>``).  Exit status: 0 success, 1 physics or
numerics failure, 2 configuration or usage error.
"""

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import load_config
from .disorder import (PERTURBATIONS, ensemble_stats, free_space_baseline, perturbation_sweep,
                       perturbation_table)
from .dynamics import evolve_2x2, evolve_full, peak_population, population_closed_form, \
    quasi_lorentzian, PopulationTrace
from .effective_model import effective_params
from .errors import ArrayQEDError, ConfigError
from .geometry import build_lattice
from .io import atomic_write, now, records_table, write_manifest
from .sensing import REPORT_HEADER, minimize_sigma, operating_point, search_window
from .sweeps import Axis, optimize_protocol, scan_R, scan_spacing, sigma_heatmap

FIGURES = ("fig2a", "fig2b", "fig3a", "fig3b", "fig4", "figS1", "figS2")
FIG2B_RATIOS = (1 / 30, 1 / 10, 1.0, 10.0, 30.0)


class Run:
    """Output directory, emitted files and physicality tallies of one command."""

    def __init__(self, cfg, command):
        self.cfg = cfg
        root = os.environ.get("ARRAYQED_OUT", "arrayqed-out")
        self.outdir = cfg.out or os.path.join(root, command)
        self.files = []
        self.flags = {}
        self.started = now()

    def write(self, name, text):
        path = os.path.join(self.outdir, name)
        atomic_write(path, text)
        self.files.append(path)
        return path

    def tally(self, name, flags):
        counts = {}
        for f in flags:
            key = f or "ok"
            counts[key] = counts.get(key, 0) + 1
        self.flags[name] = counts

    def finish(self):
        write_manifest(self.outdir, __version__, self.cfg.to_dict(), self.cfg.seed, self.started,
                       self.files, self.flags)
        return self.outdir


def _params(cfg):
    return effective_params(build_lattice(cfg.lattice_spec()))


def _physical_flag(p, delta=None):
    return "" if p.is_physical(delta) else "unphysical"


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_params(cfg, run):
    p = _params(cfg)
    rec = p.to_record()
    rec.update({"gamma_coop": p.gamma_coop, "delta0": p.delta0, "delta0_tilde": p.delta0 / p.g,
                "flag": _physical_flag(p, 0.0)})
    run.tally("params", [rec["flag"]])
    text = records_table([rec])
    run.write("params.csv", text)
    sys.stdout.write(text)


def _time_grid(cfg, p):
    pr = cfg.protocol
    t_max = pr.t_max if pr.t_max is not None else 5.0 / p.gamma_coop
    return np.linspace(0.0, t_max, pr.n_t) / p.g


def _trace(p, geom, delta, t, method):
    if method == "closed_form":
        pops = population_closed_form(p, delta, t)
        return PopulationTrace(t, pops, np.full_like(pops, np.nan), "closed_form", p.g)
    if method == "eigen_2x2":
        return evolve_2x2(p, delta, t)
    if method == "full_ode":
        return evolve_full(geom, delta, t)
    raise ConfigError(f"unknown dynamics method {method!r}")


def cmd_dynamics(cfg, run):
    geom = build_lattice(cfg.lattice_spec())
    p = effective_params(geom)
    t = _time_grid(cfg, p)
    delta = cfg.protocol.Delta * p.g
    parts = []
    for m in cfg.protocol.methods:
        tr = _trace(p, geom, delta, t, m)
        parts.append(tr.to_table().split("\n", 1)[1])
    run.tally("dynamics", [_physical_flag(p, delta)])
    run.write("dynamics.csv", "t,pop1,pop2,method\n" + "".join(parts))


def _operating_point(cfg, p):
    pr = cfg.protocol
    if pr.Delta_add is None or pr.t0 is None:
        op = minimize_sigma(p)
        if pr.Delta_add is None and pr.t0 is None:
            return op.with_shots(pr.n_shots)
        d = op.Delta_add if pr.Delta_add is None else pr.Delta_add * p.g
        t0 = op.t0 if pr.t0 is None else pr.t0 / p.g
        return operating_point(p, d, t0, pr.n_shots)
    return operating_point(p, pr.Delta_add * p.g, pr.t0 / p.g, pr.n_shots)


def cmd_sense(cfg, run):
    p = _params(cfg)
    op = _operating_point(cfg, p)
    row = op.report_row(p.g, a=cfg.lattice.spacing, R=cfg.lattice.R)
    run.tally("sense", [_physical_flag(p, op.Delta_add)])
    run.write("sense.csv", REPORT_HEADER + "\n" + row + "\n")


def _heatmap_axes(cfg, p):
    sc = cfg.scan
    (d_lo, d_hi), (t_lo, t_hi) = search_window(p)
    d_lo = d_lo if sc.Delta_add_min is None else sc.Delta_add_min * p.g
    d_hi = d_hi if sc.Delta_add_max is None else sc.Delta_add_max * p.g
    t_lo = t_lo if sc.t0_min is None else sc.t0_min / p.g
    t_hi = t_hi if sc.t0_max is None else sc.t0_max / p.g
    return np.linspace(t_lo, t_hi, sc.n_t), np.linspace(d_lo, d_hi, sc.n_delta)


def cmd_scan(cfg, run):
    sc = cfg.scan
    spec = cfg.lattice_spec()
    if sc.kind == "spacing":
        grid = scan_spacing(spec, Axis("a", sc.a_min, sc.a_max, sc.a_count).values(),
                            sc.n_delta, sc.n_t, threads=cfg.threads)
        run.tally("scan", grid.flags.ravel())
        run.write("scan.csv", grid.to_table())
    elif sc.kind == "heatmap":
        p = _params(cfg)
        T, D = _heatmap_axes(cfg, p)
        grid = sigma_heatmap(p, T, D)
        run.tally("scan", grid.flags.ravel())
        run.write("scan.csv", grid.to_table())
    elif sc.kind == "R":
        res = scan_R(_params(cfg), sc.R_grid, sc.n_delta, sc.n_t, threads=cfg.threads)
        run.write("scan.csv", res.to_table())
    else:
        raise ConfigError(f"unknown scan kind {sc.kind!r} (spacing | heatmap | R)")


def cmd_optimize(cfg, run):
    o = cfg.optimize
    bounds = {"a": (o.a_min, o.a_max), "R": (o.R_min, o.R_max)}
    opt = optimize_protocol(cfg.lattice_spec(), bounds, seed=cfg.seed, release_R=o.release_R,
                            n_grid=o.n_grid, n_starts=o.n_starts, threads=cfg.threads)
    run.write("optimum.csv", opt.to_table())


def _ensemble(cfg):
    d = cfg.disorder
    return ensemble_stats(cfg.lattice_spec(), d.sigma_pos, d.n_real, cfg.seed,
                          reoptimize=d.reoptimize, threads=cfg.threads)


def cmd_disorder(cfg, run):
    ens = _ensemble(cfg)
    run.tally("disorder", [r.flag for r in ens.records])
    run.write("disorder_records.csv", ens.records_table())
    run.write("disorder_aggregates.csv", ens.aggregate_table())


# --------------------------------------------------------------------------
# figure reproduction
# --------------------------------------------------------------------------

def _gp(title, xlabel, ylabel, body, extra=""):
    return (f"set datafile separator ','\nset key autotitle columnhead\n"
            f"set title '{title}'\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\n{extra}{body}\n")


def fig2a(cfg, run):
    p = _params(cfg)
    t = np.linspace(0.0, 5.0, cfg.protocol.n_t) / p.gamma_coop / p.g
    rows = []
    for dt in (0.0, 0.1):
        pops = population_closed_form(p, dt * p.g, t)
        rows += [{"delta": dt, "t_gamma": tt * p.g * p.gamma_coop, "pop1": v} for tt, v in zip(t, pops)]
    run.write("fig2a.csv", records_table(rows))
    run.write("fig2a.gp", _gp("impurity-1 population", "t~ Gamma_coop", "|c1|^2",
                              "plot for [i=0:1] 'fig2a.csv' every ::1 using "
                              "($1==(i*0.1) ? $2 : 1/0):3 with lines title sprintf('Delta~=%g', i*0.1)"))


def fig2b(cfg, run):
    base = _params(cfg)
    D = np.linspace(-6.0, 6.0, 241)
    rows = []
    for R in FIG2B_RATIOS:
        p = base.with_ratio(R)
        for dt in D:
            d = dt * p.g
            tp, pp = peak_population(p, d)
            try:
                ql = quasi_lorentzian(p, d)
            except ArrayQEDError:
                ql = math.nan
            rows.append({"R": R, "delta": dt, "p_peak": pp, "t_peak": tp * p.g,
                         "quasi_lorentzian": ql, "delta0": p.delta0 / p.g,
                         "flag": _physical_flag(p, d)})
    run.tally("fig2b", [r["flag"] for r in rows])
    run.write("fig2b.csv", records_table(rows))
    run.write("fig2b.gp", _gp("peak transfer vs detuning", "Delta~", "max |c1|^2",
                              "plot 'fig2b.csv' using 2:3 with lines, '' using 2:5 with lines dt 2"))


def fig3a(cfg, run):
    sc = cfg.scan
    grid = scan_spacing(cfg.lattice_spec(), Axis("a", sc.a_min, sc.a_max, sc.a_count).values(),
                        sc.n_delta, sc.n_t, threads=cfg.threads)
    run.tally("fig3a", grid.flags.ravel())
    run.write("fig3a.csv", grid.to_table())
    run.write("fig3a.gp", _gp("spectral quantities vs spacing", "a", "",
                              "plot 'fig3a.csv' using 1:3 with lp, '' using 1:4 with lp, "
                              "'' using 1:(2*$5) with lp title '2 Im S~', '' using 1:2 with lp axes x1y2",
                              "set y2tics\n"))


def fig3b(cfg, run):
    p = _params(cfg)
    T, D = _heatmap_axes(cfg, p)
    grid = sigma_heatmap(p, T, D)
    run.tally("fig3b", grid.flags.ravel())
    run.write("fig3b.csv", grid.to_table())
    run.write("fig3b.gp", _gp("sigma landscape", "t0~", "Delta_add~",
                              "plot 'fig3b.csv' using 1:2:(log10($3)) with image",
                              "set cblabel 'log10 sigma~'\n"))


def fig4(cfg, run):
    ens = _ensemble(cfg)
    _, base = free_space_baseline(cfg.lattice_spec())
    run.tally("fig4", [r.flag for r in ens.records])
    run.write("fig4.csv", ens.aggregate_table())
    run.write("fig4_records.csv", ens.records_table())
    run.write("fig4_baseline.csv", records_table([{"sigma_free_space": base}]))
    run.write("fig4.gp", _gp("sigma vs positional disorder", "sigma_pos / a", "sigma~",
                             "plot 'fig4.csv' using 1:(column('median_sigma_standard')) with lp, "
                             "'' using 1:(column('median_sigma_reopt')) with lp, "
                             f"{base!r} title 'free space' dt 2", "set logscale y\n"))


def figS1(cfg, run):
    ens = _ensemble(cfg)
    keys = ["sigma_pos", "n_real", "n_rejected"]
    for k in ("re_sigma1", "im_sigma1", "re_kappa", "im_kappa", "gamma_coop"):
        keys += [f"mean_{k}", f"std_{k}"]
    run.tally("figS1", [r.flag for r in ens.records])
    run.write("figS1.csv", records_table(ens.aggregates(), keys))
    run.write("figS1.gp", _gp("effective parameters vs disorder", "sigma_pos / a", "",
                              "plot for [c in 're_sigma1 im_sigma1 re_kappa im_kappa'] 'figS1.csv' "
                              "using 1:(column('mean_'.c)):(column('std_'.c)) with yerrorlines title c"))


def figS2(cfg, run):
    p = _params(cfg)
    op = minimize_sigma(p)
    text = ""
    flags = []
    for which in PERTURBATIONS:
        rows = perturbation_sweep(p, which, cfg.disorder.offsets, op=op)
        flags += [r["flag"] for r in rows]
        t = perturbation_table(rows)
        text += t if not text else t.split("\n", 1)[1]
    run.tally("figS2", flags)
    run.write("figS2.csv", text)
    run.write("figS2.gp", _gp("sigma vs direct parameter offsets", "offset", "sigma~",
                              "plot for [w in 're_kappa im_kappa re_sigma im_sigma'] 'figS2.csv' "
                              "using ((strcol(1) eq w) ? $2 : 1/0):7 with lp title w"))


def cmd_reproduce(cfg, run, figure):
    fn = {"fig2a": fig2a, "fig2b": fig2b, "fig3a": fig3a, "fig3b": fig3b, "fig4": fig4,
          "figS1": figS1, "figS2": figS2}.get(figure)
    if fn is None:
        raise ConfigError(f"unknown figure id {figure!r}; expected one of {', '.join(FIGURES)}")
    fn(cfg, run)


COMMANDS = {"params": cmd_params, "dynamics": cmd_dynamics, "sense": cmd_sense,
            "scan": cmd_scan, "optimize": cmd_optimize, "disorder": cmd_disorder}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads for scans and ensembles")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. lattice.spacing=0.2")
    ap = _Parser(prog="arrayqed", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    rp = sub.add_parser("reproduce", parents=[common])
    rp.add_argument("figure", help=" | ".join(FIGURES))
    return ap


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config, args.set)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        if args.out is not None:
            cfg.out = args.out
        run = Run(cfg, args.command if args.command != "reproduce" else args.figure)
        if args.command == "reproduce":
            cmd_reproduce(cfg, run, args.figure)
        else:
            COMMANDS[args.command](cfg, run)
        run.finish()
    except ConfigError as exc:
        print(f"arrayqed: error: {exc}", file=sys.stderr)
        return 2
    except ArrayQEDError as exc:
        print(f"arrayqed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
