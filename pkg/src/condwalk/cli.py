"""Command-line interface: ``condwalk {tables,check,sample,converge,report}``.

Exit codes: 0 success, 1 failed assertion or numerical failure, 2 usage or
configuration error.  Every output file carries the configuration hash and
library version; files are written atomically by this process only.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import decomposition as dec
from . import kernel, samplers, scaling, stats
from ._io import VERSION, atomic_write, dump_json, stamp
from .errors import (CondWalkError, DegenerateConditioning, MaxStepsExceeded, RejectionBudgetExceeded,
                     RowSumViolation, StateOverflow, TruncationFailure, ZeroHarmonic)
from .laws import NAMED_LAWS, load_law
from .renewal import EPS_TAIL, alili_doney_check, renewal_table, renewal_table_mc, strict_renewal
from .rng import Stream

OK, FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _law(spec):
    try:
        return load_law(spec)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"invalid law {spec!r}: {exc}") from exc


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    return json.loads(json.dumps(cfg, default=str))


# -- tables ---------------------------------------------------------------------

def cmd_tables(args) -> int:
    law = _law(args.law)
    table = renewal_table(law, args.ymax, args.eps_tail, method=args.method)
    cfg = _config(args)
    head = dict(stamp(cfg), law=law.name, law_hash=law.law_hash, eps_tail=args.eps_tail, method=args.method)
    out = Path(args.out) / f"renewal_{law.name}_{args.ymax}.csv"
    table.to_csv(out, header=head)
    print(f"V(0)={float(table.V[0])!r} V({args.ymax})={float(table.V[-1])!r} eps_tail={args.eps_tail!r} -> {out}")
    return OK


# -- check ------------------------------------------------------------------------

def _suite_harmonicity(law, args):
    r = kernel.harmonicity_check(law, None, args.x_max, args.n_max)
    tol = args.tol if args.tol is not None else 1e-10
    return {"weak": r["weak"], "strict": r["strict"], "max_residual": r["max_residual"], "tol": tol}, \
        r["max_residual"] <= tol


def _suite_duality(law, args):
    tol = args.tol if args.tol is not None else 1e-12
    res = {"endpoint": [kernel.meander_plus_duality_check(law, None, N)["max_residual"] for N in range(1, 11)],
           "cylinder": [kernel.meander_plus_duality_check(law, None, N, "cylinder")["max_residual"]
                        for N in range(1, 9)]}
    worst = max(max(res["endpoint"]), max(res["cylinder"]))
    return dict(res, max_residual=worst, tol=tol), worst <= tol


def _suite_alili_doney(law, args):
    tol = args.tol if args.tol is not None else 1e-12
    r = alili_doney_check(law, 21)
    return dict(r, tol=tol), r["max_abs_diff"] <= tol


def _suite_decomposition(law, args):
    worst_sum = 0.0
    table = renewal_table(law, 200)
    for y in range(201):
        worst_sum = max(worst_sum, abs(dec.minimum_law(table, y).total - 1.0))
    r = dec.decomposition_agreement(law, (1, 3), (8, 16), samples=args.samples, seed=args.seed)
    ok = worst_sum <= 1e-12 and all(row["p_value"] > 1e-3 for row in r["chi2"])
    ok &= all(m["max_z"] <= 3.0 for m in r["minimum"])
    return dict(r, minimum_law_sum_error=worst_sum), bool(ok)


def _suite_kernel_rows(law, args):
    cap = args.x_max
    out = {}
    for kind in ("plus", "die-at-zero"):
        k = samplers.build_h_kernel(law, None, kind, cap)
        sums = np.nansum(k.probs, axis=1)
        live = np.array([k.realizable(x) for x in range(cap + 1)])
        if kind == "die-at-zero":
            live[0] = False
        out[kind] = float(np.max(np.abs(sums[live] - 1.0))) if live.any() else 0.0
    tol = args.tol if args.tol is not None else 1e-12
    return dict(out, tol=tol), max(out.values()) <= tol


def _suite_die_at_zero(law, args):
    tol = args.tol if args.tol is not None else 1e-12
    table = renewal_table(law, args.x_max + args.n_max * max(law.max_step, 1) + 1)
    worst = 0.0
    for y in range(1, args.x_max + 1):
        if not table.W[y] > 0:
            raise ZeroHarmonic(f"W({y}) = 0 for law {law.name!r}: the die-at-zero chain is undefined from {y}")
        for N in range(1, args.n_max + 1):
            f = kernel.die_at_zero_law(law, table, y, N)
            worst = max(worst, abs(f.total + f.absorbed_mass - 1.0))
    return {"max_mass_defect": worst, "tol": tol}, worst <= tol


def _suite_constants(law, args):
    grid = [2 ** 10, 2 ** 12, 2 ** 14]
    r = scaling.constant_product_check(law, grid)
    errs = [row["error"] for row in r["rows"]]
    sup = [scaling.sup_convergence_check(law, N, survival=row["survival"]) for N, row in zip(grid, r["rows"])]
    ok = errs[-1] is not None and errs[-1] <= 0.03 * scaling.C3 and all(b < a for a, b in zip(errs, errs[1:]))
    ok &= all(s["consistent"] for s in sup)
    return {"products": r["rows"], "sup": sup}, bool(ok)


def _suite_smallness(law, args):
    grid = [2 ** k for k in range(6, 13)]
    r = dec.pre_minimum_smallness_check(law, grid, samples=args.samples, seed=args.seed)
    rows = r["rows"]
    last = rows[-1]
    ok = last["p_long"] < 0.05 and last["p_high"] < 0.05
    for a, b in zip(rows, rows[1:]):
        ok &= b["p_long"] <= a["p_long"] + a["p_long_se"] + b["p_long_se"]
        ok &= b["p_high"] <= a["p_high"] + a["p_high_se"] + b["p_high_se"]
    return r, bool(ok)


SUITES = {
    "harmonicity": _suite_harmonicity,
    "duality": _suite_duality,
    "alili-doney": _suite_alili_doney,
    "decomposition": _suite_decomposition,
    "kernel-rows": _suite_kernel_rows,
    "die-at-zero": _suite_die_at_zero,
    "constants": _suite_constants,
    "smallness": _suite_smallness,
}


def cmd_check(args) -> int:
    law = _law(args.law)
    cfg = _config(args)
    out = Path(args.out) / f"check_{args.suite}_{law.name}.json"
    try:
        result, ok = SUITES[args.suite](law, args)
    except (ZeroHarmonic, RowSumViolation, TruncationFailure, StateOverflow) as exc:
        dump_json(out, dict(stamp(cfg), config=cfg, passed=False, error=f"{type(exc).__name__}: {exc}"))
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return FAILED
    dump_json(out, dict(stamp(cfg), config=cfg, passed=bool(ok), result=result))
    print(f"{args.suite} on {law.name}: {'PASS' if ok else 'FAIL'} -> {out}")
    return OK if ok else FAILED


# -- sample -------------------------------------------------------------------------

def _sample_paths(law, args) -> list:
    kind, y, n = args.kind, args.start, args.steps
    paths = []
    if kind == "die-at-zero":
        table = renewal_table(law, y + 2)
        if y > 0 and not table.W[y] > 0:
            raise ZeroHarmonic(f"W({y}) = 0")
        k = samplers.die_at_zero_kernel_for(law, y, 64, table)
        for i in range(args.count):
            p = samplers.sample_die_at_zero(k, y, Stream(args.seed, i), max_steps=args.max_steps)
            paths.append(p.values if n is None else p.values[: n + 1])
        return paths
    if n is None:
        raise UsageError(f"--steps is required for kind {kind!r}")
    if kind == "plus":
        k = samplers.plus_kernel_for(law, y, n)
        for i in range(args.count):
            paths.append(samplers.sample_plus(k, y, n, Stream(args.seed, i)).values)
    elif kind == "decomposition":
        table = renewal_table(law, y + n * max(law.max_step, 1) + 1)
        for i in range(args.count):
            paths.append(dec.sample_plus_by_decomposition(law, table, y, n, Stream(args.seed, i)).values)
    elif kind == "rejection":
        N = args.horizon or 64 * max(n, 1)
        for i in range(args.count):
            paths.append(samplers.sample_plus_by_rejection(law, y, n, N, Stream(args.seed, i),
                                                           max_attempts=args.max_steps).values)
    else:
        from .laws import sample_path
        for i in range(args.count):
            paths.append(sample_path(law, y, n, Stream(args.seed, i)).values)
    return paths


def cmd_sample(args) -> int:
    law = _law(args.law)
    cfg = _config(args)
    st = stamp(cfg)
    try:
        paths = _sample_paths(law, args)
    except (MaxStepsExceeded, RejectionBudgetExceeded, ZeroHarmonic, StateOverflow) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return FAILED
    lines = [f"# config_hash={st['config_hash']} version={st['version']}", "path,step,state"]
    for i, p in enumerate(paths):
        lines.extend(f"{i},{k},{int(v)}" for k, v in enumerate(p))
    out = Path(args.out)
    atomic_write(out / f"paths_{args.kind}.csv", "\n".join(lines) + "\n")
    ends = np.array([int(p[-1]) for p in paths])
    lengths = np.array([len(p) - 1 for p in paths])
    vals, cnt = np.unique(ends, return_counts=True)
    summary = dict(st, config=cfg, count=len(paths), endpoint_mean=float(ends.mean()),
                   endpoint_counts={str(int(v)): int(c) for v, c in zip(vals, cnt)},
                   lengths={"min": int(lengths.min()), "median": float(np.median(lengths)), "max": int(lengths.max())})
    dump_json(out / f"paths_{args.kind}.json", summary)
    print(f"{len(paths)} {args.kind} paths -> {out}")
    return OK


# -- converge -------------------------------------------------------------------------

def cmd_converge(args) -> int:
    try:
        config = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
    if config.get("kind") not in scaling.KINDS:
        raise UsageError(f"invalid kind {config.get('kind')!r}; expected one of {scaling.KINDS}")
    try:
        _law(config.get("law"))
        report = scaling.experiment_from_config(config)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc
    stem = args.stem or f"converge_{config['kind']}_{report.config['law']}"
    paths = report.write(args.out, stem)
    for r in report.rows:
        print(f"N={r['N']:>6} a_N={r['a_N']:.4g} ks={r['ks']:.5f} samples={r['samples']}")
    print(f"wall time {report.wall_time:.1f}s -> {paths[0].parent}")
    if args.max_ks is not None and not report.rows[-1]["ks"] < args.max_ks:
        return FAILED
    return OK


# -- report ----------------------------------------------------------------------------

def _local_ratio(law, args) -> dict:
    alpha = law.alpha or 2.0
    g = alpha * (1.0 - (law.rho if law.rho is not None else 0.5))
    if law.max_step - law.min_step <= 4 * scaling.EXACT_SPAN:
        table = renewal_table(law, args.ymax)
        V, W, se = table.V, table.W, None
    else:
        mc = renewal_table_mc(law, args.ymax, args.paths, Stream(args.seed).gen)
        V = mc["V"]
        W = np.diff(np.concatenate([[0.0], V]))
        se = mc["se"]
    x = np.arange(1, args.ymax + 1)
    ratio = W[1:] * x / (g * V[1:])
    return {"x": x, "ratio": ratio, "V": V, "W": W, "V_se": se, "exponent": g}


def cmd_report(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    if args.local_ratio:
        law = _law(args.law)
        r = _local_ratio(law, args)
        dump_json(out / f"local_ratio_{law.name}.json", dict(stamp(cfg), config=cfg, **r))
        for xv, rv in list(zip(r["x"], r["ratio"]))[:: max(1, args.ymax // 10)]:
            print(f"x={int(xv):>5} ratio={rv:.4f}")
        return OK
    if args.dir is None:
        raise UsageError("report needs --dir or --local-ratio")
    rows = []
    for p in sorted(Path(args.dir).glob("*.json")):
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError:
            continue
        entry = {"file": p.name, "config_hash": doc.get("config_hash"), "version": doc.get("version")}
        for k in ("passed", "final_ks", "ks_non_increasing", "count"):
            if k in doc:
                entry[k] = doc[k]
        rows.append(entry)
    dump_json(out / "report.json", dict(stamp(cfg), config=cfg, entries=rows))
    for e in rows:
        print(" ".join(f"{k}={v}" for k, v in e.items()))
    return OK


# -- parser -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="condwalk", description="Conditioned lattice random walks.")
    ap.add_argument("--version", action="version", version=VERSION)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, law=True):
        if law:
            p.add_argument("--law", required=True, help=f"built-in ({', '.join(NAMED_LAWS)}) or JSON path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("tables", help="renewal function table V, W")
    common(p)
    p.add_argument("--ymax", type=int, required=True)
    p.add_argument("--eps-tail", type=float, default=EPS_TAIL)
    p.add_argument("--method", choices=("wiener-hopf", "absorption"), default="wiener-hopf")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("check", help="exact identity and sampler checks")
    common(p)
    p.add_argument("--suite", required=True, choices=sorted(SUITES))
    p.add_argument("--x-max", type=int, default=50)
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sample", help="sample conditioned trajectories")
    common(p)
    p.add_argument("--kind", required=True, choices=("plus", "die-at-zero", "decomposition", "rejection", "free"))
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--horizon", type=int, default=None, help="rejection horizon N (default 64 * steps)")
    p.add_argument("--max-steps", type=int, default=1_000_000, help="budget for die-at-zero / rejection")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("converge", help="run a convergence experiment from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", default=".")
    p.add_argument("--stem", default=None)
    p.add_argument("--max-ks", type=float, default=None, help="exit 1 if the final K-S distance is not below this")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("report", help="summarise outputs or print diagnostics")
    p.add_argument("--dir", default=None, help="directory of JSON outputs to summarise")
    p.add_argument("--out", default=".")
    p.add_argument("--local-ratio", action="store_true", help="W(x) x / (g V(x)) diagnostic")
    p.add_argument("--law", default="zipf2")
    p.add_argument("--ymax", type=int, default=50)
    p.add_argument("--paths", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE
    except (TruncationFailure, DegenerateConditioning, CondWalkError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
