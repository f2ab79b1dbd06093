"""Command-line driver.

Exit codes: 0 success, 2 config or usage error, 3 numerical tolerance failure,
4 resource budget exceeded. Errors print one line: "error: <kind>: <reason>".
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import blcheck, config, diophantine, harmonic, lattice, modelset, patterns, variance
from . import geometry as geo

SCHEMAS = """output schemas:
  count, sweep        CSV t,count,main_term,discrepancy,boundary_warnings
  poisson-check       JSON {t, sign, a_down, a_left, direct, volume_term, remainder_term,
                            tail_bound, residual, n_dual}
  repellence          CSV epsilon,min_left,witness_coords,psi_value,margin
  liouville           JSON {psi, c_n, next_exponent, q_n, m_n, a_approx, verified}
                      (big integers as decimal strings)
  variance            CSV t,nv_diff,tail_bound,nv_mc,nv_stderr,l1_mc,mean_mc
  patterns            JSON {r, clusters, n_patterns, tiling_defect, domains: [{pattern, volume,
                            volume_stderr, frequency, region}]}; --csv adds the
                      complexity table CSV r,n_patterns over --r-grid
  blsum               CSV n,t,Z_estimate,log_Z,partial_sum,argmax
  predict-exponent    one number, or "d_down,-s" for slowly growing psi

exit codes: 0 ok, 2 config/usage error, 3 tolerance failure, 4 budget exceeded
"""


class CliError(Exception):
    def __init__(self, code, kind, reason):
        super().__init__(reason)
        self.code, self.kind, self.reason = code, kind, reason


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(2, "usage", message)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(args, text):
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _cfg(args):
    if not args.config:
        raise CliError(2, "config", "--config is required for this command")
    try:
        cfg = config.load(args.config)
    except config.ConfigError as exc:
        raise CliError(2, "config", f"{exc.path or '<root>'}: {exc.reason}") from None
    return cfg


def _seed(args, cfg):
    return cfg.seed if args.seed is None else args.seed


def _tol(args, default):
    return default if args.tolerance is None else args.tolerance


# -- commands ------------------------------------------------------------------

COUNT_HEADER = ("t", "count", "main_term", "discrepancy", "boundary_warnings")


def cmd_count(args):
    cfg = _cfg(args)
    return _csv(COUNT_HEADER, [modelset.count(cfg.spec, args.t).as_row()])


def cmd_sweep(args):
    cfg = _cfg(args)
    grid = args.t_grid or list(cfg.t_grid)
    if not grid:
        raise CliError(2, "config", "t_grid: empty (give --t-grid or set t_grid)")
    rows = modelset.discrepancy_sweep(cfg.spec, grid, threads=args.threads)
    return _csv(COUNT_HEADER, [r.as_row() for r in rows])


def cmd_poisson(args):
    cfg = _cfg(args)
    t = args.t
    a_down = min(0.5, t / 8) if args.a_down is None else args.a_down
    params = harmonic.MollifierParams(a_down, args.a_left)
    tol = _tol(args, 1e-7)
    direct = harmonic.smoothed_count(cfg.spec, t, params, args.sign).value
    b = harmonic.poisson_dual_sum(cfg.spec, t, params, args.sign, tol)
    residual = abs(direct - b.total)
    out = {"t": t, "sign": args.sign, "a_down": a_down, "a_left": args.a_left,
           "direct": direct, "volume_term": b.volume_term, "remainder_term": b.remainder_term,
           "tail_bound": b.tail_bound, "residual": residual, "n_dual": b.n_dual}
    text = _json(out)
    if residual > max(1e-6, b.tail_bound):
        _emit(args, text)
        raise CliError(3, "tolerance", f"residual {residual:.3e} exceeds tail bound {b.tail_bound:.3e}")
    return text


def cmd_repellence(args):
    cfg = _cfg(args)
    eps = args.epsilons or list(np.logspace(0, -3, 10))
    prof = diophantine.repellence_profile(cfg.spec.lattice, cfg.spec.split, eps, args.radius)
    rows = []
    for e, ml, w in zip(prof.epsilons, prof.min_left, prof.witnesses):
        pv = cfg.psi(1 / e) if cfg.psi is not None else None
        margin = (ml / pv) if pv is not None and math.isfinite(ml) else None
        rows.append((float(e), float(ml), "" if w is None else " ".join(map(str, w)), pv, margin))
    return _csv(("epsilon", "min_left", "witness_coords", "psi_value", "margin"), rows)


def cmd_liouville(args):
    cfg = _cfg(args)
    data, is_dual = diophantine.liouville_data_of(cfg.spec.lattice)
    if data is None or args.depth is not None:
        if cfg.psi is None:
            raise CliError(2, "config", "psi: required to construct Liouville data")
        data = diophantine.liouville_number(cfg.psi, args.depth or 3)
    out = data.to_json()
    out["verified"] = bool(diophantine.verify_liouville(data))
    if not out["verified"]:
        _emit(args, _json(out))
        raise CliError(3, "tolerance", "exact Liouville verification failed")
    return _json(out)


def cmd_variance(args):
    cfg = _cfg(args)
    ts = args.t or list(cfg.t_grid)
    if not ts:
        raise CliError(2, "config", "t_grid: empty (give --t or set t_grid)")
    n = args.samples or cfg.samples
    rows = []
    for t in ts:
        rep = variance.variance_report(cfg.spec, t, args.mode, n, _seed(args, cfg),
                                       _tol(args, cfg.tolerance))
        rows.append(rep.as_row())
    return _csv(("t", "nv_diff", "tail_bound", "nv_mc", "nv_stderr", "l1_mc", "mean_mc"), rows)


def _region_json(region):
    if region is None:
        return None
    if isinstance(region, tuple):
        return [geo.region_to_json(b) for b in region]
    return geo.region_to_json(region)


def cmd_patterns(args):
    cfg = _cfg(args)
    doms = patterns.acceptance_domains(cfg.spec, args.r, clusters=args.clusters,
                                       seed=_seed(args, cfg))
    cov = cfg.spec.lattice
    entries = [{"pattern": d.pattern.as_lists(), "volume": d.volume, "volume_stderr": d.volume_stderr,
                "frequency": patterns.pattern_frequency(d, cov), "region": _region_json(d.region)}
               for d in doms]
    out = {"r": args.r, "clusters": args.clusters, "n_patterns": len(doms),
           "tiling_defect": None if args.clusters else patterns.tiling_defect(doms, cfg.spec.window),
           "domains": entries}
    if args.csv:
        grid = sorted(set(args.r_grid or []) | {args.r})
        rows = patterns.complexity(cfg.spec, grid)
        with open(args.csv, "w") as f:
            f.write(_csv(("r", "n_patterns"), rows))
    return _json(out)


def cmd_blsum(args):
    cfg = _cfg(args)
    rep = blcheck.dyadic_log_sum(cfg.spec, args.alpha, args.n_max, args.range)
    return _csv(("n", "t", "Z_estimate", "log_Z", "partial_sum", "argmax"), rep.csv_rows())


def cmd_predict(args):
    if (args.mu is None) == (args.log_beta is None):
        raise CliError(2, "usage", "give exactly one of --mu and --log-beta")
    psi = (diophantine.PsiFunction.power(1.0, args.mu) if args.mu is not None
           else diophantine.PsiFunction.log(1.0, args.log_beta))
    e = diophantine.predicted_exponent(args.d_down, args.d_left, args.s, psi, args.region)
    if isinstance(e, tuple):
        return f"{_fmt(e[0])},{_fmt(e[1])}\n"
    return f"{_fmt(float(e))}\n"


# -- parser --------------------------------------------------------------------

def _positive(x):
    v = float(x)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {x}")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config path or bundled name (%s)" % ", ".join(config.bundled()))
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--tolerance", type=_positive, help="override the numerical tolerance")

    p = _Parser(prog="cutproject", description="Experiments on cut-and-project sets.",
                epilog=SCHEMAS, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, fn, help):
        sp = sub.add_parser(name, parents=[common], help=help, epilog=SCHEMAS,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("count", cmd_count, "count points in t*search")
    sp.add_argument("--t", type=_positive, required=True)
    sp = add("sweep", cmd_sweep, "discrepancy over a t grid")
    sp.add_argument("--t-grid", type=_positive, nargs="+")
    sp = add("poisson-check", cmd_poisson, "smoothed count vs volume term + dual remainder")
    sp.add_argument("--t", type=_positive, required=True)
    sp.add_argument("--sign", type=int, choices=(1, -1), default=1)
    sp.add_argument("--a-down", type=_positive)
    sp.add_argument("--a-left", type=_positive, default=0.1)
    sp = add("repellence", cmd_repellence, "repellence profile of the lattice")
    sp.add_argument("--epsilons", type=_positive, nargs="+")
    sp.add_argument("--radius", type=_positive, default=1000.0)
    sp = add("liouville", cmd_liouville, "exact Liouville data")
    sp.add_argument("--depth", type=int)
    sp = add("variance", cmd_variance, "number variance by diffraction and Monte Carlo")
    sp.add_argument("--mode", choices=("diffraction", "mc", "both"), default="both")
    sp.add_argument("--t", type=_positive, nargs="+")
    sp.add_argument("--samples", type=int)
    sp = add("patterns", cmd_patterns, "acceptance domains of r-patterns")
    sp.add_argument("--r", type=_positive, required=True)
    sp.add_argument("--clusters", action="store_true")
    sp.add_argument("--csv", help="also write the complexity table r,n_patterns here")
    sp.add_argument("--r-grid", type=_positive, nargs="+", help="radii for the complexity table")
    sp = add("blsum", cmd_blsum, "dyadic log sums of Z_alpha")
    sp.add_argument("--n-max", type=int, default=10)
    sp.add_argument("--range", type=int, default=1000)
    sp.add_argument("--alpha", type=_positive)
    sp = add("predict-exponent", cmd_predict, "discrepancy exponent from the parameters")
    sp.add_argument("--d-down", type=int, required=True)
    sp.add_argument("--d-left", type=int, required=True)
    sp.add_argument("--s", type=_positive, required=True)
    sp.add_argument("--mu", type=_positive)
    sp.add_argument("--log-beta", type=_positive)
    sp.add_argument("--region", choices=("ball", "finite-perimeter"), default="ball")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise CliError(2, "usage", "--threads must be >= 1")
        text = args.fn(args)
        _emit(args, text)
        return 0
    except CliError as exc:
        err = exc
    except lattice.BudgetError as exc:
        err = CliError(4, "budget", str(exc))
    except config.ConfigError as exc:
        err = CliError(2, "config", str(exc))
    except ValueError as exc:  # module precondition failures
        err = CliError(2, "input", str(exc))
    except OSError as exc:
        err = CliError(2, "io", f"{exc.filename}: {exc.strerror}")
    reason = " ".join(str(err.reason).split())
    print(f"error: {err.kind}: {reason}", file=sys.stderr)
    return err.code


if __name__ == "__main__":
    sys.exit(main())
