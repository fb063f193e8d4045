"""``czkit`` command line.

Every command validates its configuration, runs, and writes a JSON report
(stdout or ``--out``) that embeds the configuration and schema version.
Exit status: 0 success, 2 invalid input, 3 failed computation.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import CZKitError
from .fields import build_field, parse_exponent, parse_grid
from .io import atomic_write_text, dumps, write_csv

SCHEMA_VERSION = 1

CSV_SECTIONS = {
    "alpha_sweep": ["alpha", "sum_mu_Qi", "c_omega", "N", "c_b", "c_g"],
    "kfunc": ["t", "K_brute", "K_formula", "K_cz_upper"],
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _exp(text):
    try:
        return parse_exponent(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad exponent {text!r}") from exc


def _common(p, space=True, field=False):
    if space:
        p.add_argument("--space", required=True, help="space spec (e.g. cycle:8, grid:4x4) or graph JSON path")
    if field:
        p.add_argument("--field", default="spike:0", help="field CSV or generator spec (spike:i, random:seed, ...)")
    p.add_argument("--seed", type=int, default=0, help="seed for probes and random fields; CZKIT_SEED overrides")
    p.add_argument("--out", help="report path (default: stdout)")


def build_parser():
    parser = _Parser(prog="czkit", description="Calderon-Zygmund decompositions on weighted graphs")
    parser.add_argument("--version", action="version", version=f"czkit {__version__}")
    top = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    sp = top.add_parser("space", help="build or inspect a space").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    g = sp.add_parser("gen", help="write a space as graph JSON")
    _common(g)
    g = sp.add_parser("info", help="size, diameter and measure of a space")
    _common(g)

    ck = top.add_parser("check", help="measure inequality constants").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    g = ck.add_parser("doubling")
    _common(g)
    g = ck.add_parser("poincare")
    _common(g)
    g.add_argument("--q", type=_exp, default=2.0)
    g.add_argument("--kind", choices=["classical", "relative"], default="classical")
    g.add_argument("--collection", choices=["mean", "heat"], default="mean")
    g.add_argument("--mode", choices=["nonhomogeneous", "homogeneous"], default="nonhomogeneous")
    g = ck.add_parser("pseudo")
    _common(g)
    g.add_argument("--q", type=_exp, default=2.0)
    g = ck.add_parser("global-pseudo")
    _common(g)
    g.add_argument("--q", type=_exp, default=2.0)
    g.add_argument("--t-grid", default=None, help="geom:lo:hi:num or comma list")
    g = ck.add_parser("offdiag")
    _common(g)
    g.add_argument("--q", type=_exp, default=1.0)
    g.add_argument("--r", type=_exp, default=2.0)
    g.add_argument("--N", type=float, default=10.0, dest="N_equiv")
    g.add_argument("--collection", choices=["mean", "heat"], default="heat")
    g.add_argument("--mode", choices=["nonhomogeneous", "homogeneous"], default="nonhomogeneous")
    g = ck.add_parser("kernel")
    _common(g)
    g.add_argument("--t-grid", default="0.1,1,10")

    cz = top.add_parser("czd", help="Calderon-Zygmund decomposition").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name in ("run", "sweep"):
        g = cz.add_parser(name)
        _common(g, field=True)
        if name == "run":
            g.add_argument("--alpha", type=float, required=True)
            g.add_argument("--g-csv", help="export the good part as CSV")
            g.add_argument("--b-csv", help="export sum of bad parts as CSV")
        else:
            g.add_argument("--alphas", required=True, help="geom:lo:hi:num or comma list")
            g.add_argument("--csv", help="export the alpha sweep table")
        g.add_argument("--q", type=_exp, default=1.0)
        g.add_argument("--p", type=_exp, default=2.0)
        g.add_argument("--r", type=_exp, default=math.inf)
        g.add_argument("--collection", choices=["mean", "heat"], default="mean")
        g.add_argument("--mode", choices=["nonhomogeneous", "homogeneous"], default="nonhomogeneous")
        g.add_argument("--C1", type=float, default=2.0)
        g.add_argument("--C2", type=float, default=8.0)
    g = cz.add_parser("verify")
    g.add_argument("input", help="decomposition JSON written by czd run")
    g.add_argument("--out")

    it = top.add_parser("interp", help="interpolation quantities").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    g = it.add_parser("kfunc")
    _common(g, field=True)
    g.add_argument("--pair", default="L1,Linf", help="L<p0>,L<p1> or W<s>,W<r>")
    g.add_argument("--t-grid", default="geom:0.1:10:9")
    g.add_argument("--q", type=_exp, default=1.0, help="maximal exponent of the CZ upper bound")
    g.add_argument("--collection", choices=["mean", "heat"], default="mean")
    g.add_argument("--csv", help="export the K table")
    g = it.add_parser("besov")
    _common(g, field=True)
    g.add_argument("--a", type=float, required=True, help="negative Besov exponent")
    g.add_argument("--t-grid", default=None)
    g = it.add_parser("gn")
    _common(g, field=True)
    g.add_argument("--p", type=_exp, default=2.0)
    g.add_argument("--l", type=_exp, default=4.0)
    g.add_argument("--t-grid", default=None)

    rp = top.add_parser("report", help="combine or export reports").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    g = rp.add_parser("merge")
    g.add_argument("inputs", nargs="+")
    g.add_argument("--out")
    g = rp.add_parser("csv")
    g.add_argument("input")
    g.add_argument("--section", required=True, choices=sorted(CSV_SECTIONS))
    g.add_argument("--out", required=True)
    return parser


# --- helpers ---------------------------------------------------------------------

def _config(args):
    cfg = {k: v for k, v in vars(args).items() if k not in ("out",)}
    return json.loads(dumps(cfg))


def _versions():
    import scipy

    return {"czkit": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _report(args, results, passed=None):
    rep = {
        "schema_version": SCHEMA_VERSION,
        "command": f"{args.group} {args.cmd}",
        "config": _config(args),
        "seed": getattr(args, "seed", None),
        "versions": _versions(),
        "results": results,
    }
    if passed is not None:
        rep["summary"] = {"passed": bool(passed)}
    return rep


def _emit(obj, out):
    text = dumps(obj)
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _space(args):
    from .space import build_space

    return build_space(args.space)


# --- commands ----------------------------------------------------------------------

def cmd_space(args):
    sp = _space(args)
    if args.cmd == "gen":
        if args.out:
            atomic_write_text(args.out, json.dumps(sp.to_json(), indent=1) + "\n")
            return None
        return sp.to_json()
    return _report(args, {
        "n": sp.n, "edges": sp.n_edges, "diameter": sp.diameter, "total_measure": sp.total_measure,
        "min_mu": float(sp.mu.min()), "max_mu": float(sp.mu.max()),
    })


def cmd_check(args):
    from . import poincare
    from .semigroup import kernel_bounds_report, make_collection
    from .space import doubling_profile

    sp = _space(args)
    if args.cmd == "doubling":
        return _report(args, {"doubling": doubling_profile(sp).to_dict()})
    if args.cmd == "poincare":
        coll = make_collection(sp, args.collection) if args.kind == "relative" else None
        rep = poincare.poincare_constant(sp, args.q, args.kind, collection=coll, mode=args.mode, seed=args.seed)
        return _report(args, {"poincare": rep.to_dict()}, math.isfinite(rep.constant))
    if args.cmd == "pseudo":
        rep = poincare.poincare_constant(sp, args.q, "pseudo", seed=args.seed)
        return _report(args, {"pseudo": rep.to_dict()}, math.isfinite(rep.constant))
    if args.cmd == "global-pseudo":
        tg = parse_grid(args.t_grid) if args.t_grid else None
        rep = poincare.poincare_constant(sp, args.q, "global_pseudo", t_grid=tg, seed=args.seed)
        chain = poincare.global_from_local(sp, args.q, t_grid=tg, seed=args.seed)
        return _report(args, {"global_pseudo": rep.to_dict(), "global_from_local": chain}, chain["holds"])
    if args.cmd == "offdiag":
        reps = poincare.offdiagonal_constants(sp, make_collection(sp, args.collection), args.q, args.r,
                                              args.N_equiv, mode=args.mode, seed=args.seed)
        return _report(args, {"offdiag": {k: v.to_dict() for k, v in reps.items()}},
                       all(math.isfinite(v.constant) for v in reps.values()))
    if args.cmd == "kernel":
        rep = kernel_bounds_report(sp, parse_grid(args.t_grid), seed=args.seed)
        return _report(args, {"kernel": rep.to_dict()}, all(c.passed for c in rep.checks.values()))
    raise AssertionError(args.cmd)


def cmd_czd(args):
    from .calculus import write_field
    from .czd import alpha_sweep, budget_fit, cz_decompose, load_decomposition, verify_cz

    if args.cmd == "verify":
        dec = load_decomposition(args.input)
        ver = verify_cz(dec)
        rep = {"schema_version": SCHEMA_VERSION, "command": "czd verify", "config": {"input": args.input},
               "versions": _versions(), "results": {"verification": ver.to_dict()},
               "summary": {"passed": ver.passed}}
        return rep
    sp = _space(args)
    f = build_field(sp, args.field, args.seed)
    if args.cmd == "run":
        dec = cz_decompose(sp, f, args.alpha, args.p, args.q, args.r, args.collection, args.mode, args.C1, args.C2)
        ver = verify_cz(dec)
        if args.g_csv:
            write_field(sp, dec.good, args.g_csv)
        if args.b_csv:
            write_field(sp, dec.bad.sum(axis=0) if len(dec.bad) else np.zeros(sp.n), args.b_csv)
        rep = _report(args, {"decomposition": dec.to_dict(), "verification": ver.to_dict()}, ver.passed)
        return rep
    alphas = parse_grid(args.alphas)
    rows, S = alpha_sweep(sp, f, alphas, args.p, args.q, args.r, args.collection, args.mode, args.C1, args.C2) \
        if len(alphas) else ([], None)
    slope, spread = budget_fit(rows) if rows else (math.nan, math.nan)
    if args.csv:
        write_csv(args.csv, CSV_SECTIONS["alpha_sweep"], rows)
    return _report(args, {
        "alpha_sweep": rows,
        "min_alpha": None if S is None else float(S.min()),
        "budget_slope": slope,
        "c_omega_spread": spread,
    }, all(r["verified"] for r in rows))


def cmd_interp(args):
    from .interpolation import besov_norm, gn_check, k_curve, k_lebesgue, k_sobolev_upper, parse_pair

    sp = _space(args)
    f = build_field(sp, args.field, args.seed)
    if args.cmd == "kfunc":
        kind, a, b = parse_pair(args.pair)
        tg = parse_grid(args.t_grid)
        if len(tg) == 0 or np.any(tg <= 0):
            raise CZKitError("invalid-grid", "t grid must be nonempty and positive")
        brute = k_curve(sp, f, tg, (kind, a, b))
        rows = []
        for t, kb in zip(tg, brute):
            row = {"t": float(t), "K_brute": kb.value, "K_formula": None, "K_cz_upper": None}
            if kind == "lebesgue":
                row["K_formula"] = k_lebesgue(sp, f, t, a, b).value
            else:
                try:
                    row["K_cz_upper"] = k_sobolev_upper(sp, f, t, a, b, args.q, args.collection).value
                except CZKitError as exc:
                    if exc.code != "degenerate-threshold":
                        raise
            rows.append(row)
        if args.csv:
            write_csv(args.csv, CSV_SECTIONS["kfunc"], rows)
        ok = all((r["K_formula"] is None or r["K_brute"] <= r["K_formula"] * (1 + 1e-8))
                 and (r["K_cz_upper"] is None or r["K_brute"] <= r["K_cz_upper"] * (1 + 1e-8)) for r in rows)
        return _report(args, {"kfunc": rows}, ok)
    if args.cmd == "besov":
        tg = parse_grid(args.t_grid) if args.t_grid else None
        return _report(args, {"besov": {"a": args.a, "value": besov_norm(sp, f, args.a, tg),
                                        "difference_variant": besov_norm(sp, f, args.a, tg, "difference")}})
    if args.cmd == "gn":
        tg = parse_grid(args.t_grid) if args.t_grid else None
        res = gn_check(sp, f, args.p, args.l, t_grid=tg)
        return _report(args, {"gn": res}, math.isfinite(res["sup"]))
    raise AssertionError(args.cmd)


def _load_report(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CZKitError("invalid-spec", f"cannot read report {path}: {exc}") from exc


def _find_section(rep, section):
    if section in rep.get("results", {}):
        return rep["results"][section]
    for sub in rep.get("reports", []):
        found = _find_section(sub, section)
        if found is not None:
            return found
    return None


def cmd_report(args):
    if args.cmd == "merge":
        reps = [_load_report(p) for p in args.inputs]
        for p, r in zip(args.inputs, reps):
            if r.get("schema_version") != SCHEMA_VERSION:
                raise CZKitError("schema-mismatch", f"{p} has schema {r.get('schema_version')}, expected {SCHEMA_VERSION}")
        passed = all(r.get("summary", {}).get("passed", True) for r in reps)
        return {"schema_version": SCHEMA_VERSION, "command": "report merge", "config": {"inputs": args.inputs},
                "reports": reps, "summary": {"passed": passed}}
    rep = _load_report(args.input)
    rows = _find_section(rep, args.section)
    if rows is None:
        raise CZKitError("missing-section", f"report has no section {args.section!r}")
    write_csv(args.out, CSV_SECTIONS[args.section], rows)
    return None


COMMANDS = {"space": cmd_space, "check": cmd_check, "czd": cmd_czd, "interp": cmd_interp, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    env_seed = os.environ.get("CZKIT_SEED")
    if env_seed is not None and hasattr(args, "seed"):
        try:
            args.seed = int(env_seed)
        except ValueError:
            print("czkit: error: CZKIT_SEED must be an integer", file=sys.stderr)
            return 2
    try:
        result = COMMANDS[args.group](args)
        if result is not None:
            _emit(result, getattr(args, "out", None))
    except CZKitError as exc:
        print(f"czkit: error: {exc}", file=sys.stderr)
        return 2 if exc.is_validation else 3
    except Exception as exc:  # noqa: BLE001 - any other failure is a computation error
        print(f"czkit: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
