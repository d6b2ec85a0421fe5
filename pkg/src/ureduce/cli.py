"""Command-line frontend.

Every subcommand prints one JSON object (UTF-8, snake_case keys) to stdout,
or to ``--output`` when given. Exit codes: 0 on success, 1 on input/output or
configuration errors, 2 on statistical failures such as a nonpositive
variance estimate, an empty motif count or a regime mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .design import SCHEMES, build_deterministic, build_random, complete_design, design_to_text, read_design, \
    verify_assumption2, write_design
from .edgeworth import grid_pairs
from .errors import GraphFormatError, StatisticalError, UReduceError
from .inference import DEFAULT_C_DELTA, InferenceReport, ci_degenerate_random, ci_nondegenerate, detect_k0, \
    pvalue_degenerate_random, pvalue_nondegenerate, _jsonable
from .kernels import as_dataset, builtin_kernel

RANDOM_SCHEMES = ("J1", "J2", "J3", "J4")


class InputError(UReduceError):
    """Bad input files or flag combinations (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; exit code 2 is reserved for statistics
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _kv(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        value = json.loads(value)
    except json.JSONDecodeError:
        pass
    return key.strip(), value


# ---------------------------------------------------------------------------
# inputs


def read_csv(path, header: bool = False, delimiter: str = ",") -> np.ndarray:
    """One observation per row, one coordinate per column."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if header:
        rows = rows[1:]
    if not rows:
        raise InputError(f"{path}: no observations")
    try:
        X = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric entry ({exc})") from exc
    if X.ndim != 2:
        raise InputError(f"{path}: rows have differing numbers of columns")
    return as_dataset(X)


def _kernel(args):
    return builtin_kernel(args.kernel, **dict(args.kernel_param or []))


def _design(args, n, r):
    if args.scheme in RANDOM_SCHEMES and args.seed is None:
        raise InputError(f"--seed is required for the randomized scheme {args.scheme}")
    if args.scheme == "deterministic":
        return build_deterministic(n, r, args.alpha)
    if args.scheme == "complete":
        return complete_design(n, r)
    return build_random(args.scheme, n, r, args.alpha, rng_seed=args.seed)


def _smoother_seed(seed):
    # the smoother draws from its own stream so it is independent of the design
    return np.random.SeedSequence([0 if seed is None else seed, 1])


# ---------------------------------------------------------------------------
# subcommands


def _u_report(args, want_ci: bool, want_p: bool):
    X = read_csv(args.data, args.header, args.delimiter)
    kernel = _kernel(args)
    design = _design(args, X.shape[0], kernel.degree)
    case = args.case
    notes = []
    if case == "auto":
        k0 = detect_k0(X, kernel, args.alpha)
        case = "nondegenerate" if k0 == 1 else "degenerate"
        notes.append(f"detected k0={k0}")
    sseed = _smoother_seed(args.seed)
    t0 = time.perf_counter()
    if case == "degenerate":
        ci = ci_degenerate_random(X, kernel, design, args.beta, args.c_delta, sseed) if want_ci else None
        pv = pvalue_degenerate_random(X, kernel, design, args.mu0, args.c_delta, sseed) if want_p else None
    else:
        ci = ci_nondegenerate(X, kernel, design, args.beta, args.c_delta, sseed) if want_ci else None
        pv = pvalue_nondegenerate(X, kernel, design, args.mu0, args.c_delta, sseed) if want_p else None
    base = ci or pv
    report = InferenceReport(
        base.estimate,
        ci.ci_low if ci else None,
        ci.ci_high if ci else None,
        pv.pvalue if pv else None,
        args.beta if want_ci else None,
        design.alpha, design.scheme, args.seed, base.smoother_value, time.perf_counter() - t0,
        base.method, pv.t_stat if pv else None, base.scale, args.mu0 if want_p else None,
        notes + list(base.notes), dict(base.extra),
    )
    if args.grid_csv:
        from .edgeworth import Expansion

        exp = Expansion.from_dict(base.extra["expansion"])
        _write_rows(args.grid_csv, ["u", "G"], grid_pairs(exp))
    out = report.to_dict()
    out.update({"kernel": kernel.name, "kernel_params": dict(kernel.params), "case": case, "n": int(X.shape[0]),
                "design_size": design.size, "c_delta": args.c_delta, "data": args.data})
    return out


def cmd_infer(args):
    return _u_report(args, True, args.mu0 is not None)


def cmd_ci(args):
    return _u_report(args, True, False)


def cmd_test(args):
    return _u_report(args, False, True)


def cmd_k0(args):
    X = read_csv(args.data, args.header, args.delimiter)
    kernel = _kernel(args)
    k0, xi, threshold = detect_k0(X, kernel, args.alpha, args.c0, return_estimates=True)
    return {"k0": k0, "xi_sq": xi, "threshold": threshold, "alpha": args.alpha, "c0": args.c0,
            "kernel": kernel.name, "n": int(X.shape[0]), "data": args.data}


def cmd_design(args):
    if args.action == "emit":
        d = _design(args, args.n, args.r)
        text = design_to_text(d)
        if args.design_file:
            write_design(d, args.design_file)
        summary = _design_summary(d)
        summary["design_file"] = args.design_file
        if not args.design_file:
            summary["text"] = text
        return summary
    if not args.design_file:
        raise InputError("design inspect needs --design-file")
    try:
        d = read_design(args.design_file)
    except OSError as exc:
        raise InputError(f"cannot read {args.design_file}: {exc.strerror or exc}") from exc
    return _design_summary(d)


def _design_summary(d):
    a1 = d.a1()
    out = {"n": d.n, "r": d.r, "alpha": d.alpha, "scheme": d.scheme, "seed": d.seed, "size": d.size,
           "a1_min": int(a1.min()), "a1_max": int(a1.max()), "b1": d.b1, "b2": d.b2}
    out["assumption2"] = verify_assumption2(d)
    return out


def cmd_network(args):
    from .network import block_graphon, builtin_motif, ci_network, ci_network_sparse, generate_graphon, \
        pvalue_network, rate_bound, read_edge_list, read_motif

    if args.scheme in RANDOM_SCHEMES and args.seed is None:
        raise InputError(f"--seed is required for the randomized scheme {args.scheme}")
    try:
        if args.edge_list:
            graph = read_edge_list(args.edge_list)
            source = {"edge_list": args.edge_list}
            rho = args.rho if args.rho_given else None
        else:
            if args.n is None:
                raise InputError("--n is required with --graphon")
            shares = tuple(args.shares) if args.shares else None
            spec = block_graphon(args.p_within, args.p_between, args.blocks, args.rho, args.seed, shares)
            graph = generate_graphon(args.n, spec, rng=np.random.default_rng(np.random.SeedSequence([args.seed or 0, 2])))
            source = {"graphon": args.graphon, "p_within": args.p_within, "p_between": args.p_between,
                      "blocks": args.blocks, "shares": list(spec.params["shares"])}
            rho = args.rho
        motif = read_motif(args.motif_file) if args.motif_file else builtin_motif(args.motif)
    except OSError as exc:
        raise InputError(f"cannot read input: {exc.strerror or exc}") from exc
    except GraphFormatError as exc:
        raise InputError(str(exc)) from exc
    design = _design(args, graph.n, motif.r)
    rho_eff = rho if rho is not None else max(graph.n_edges / math.comb(graph.n, 2), 1e-12)
    advice = rate_bound(rho_eff, graph.n, args.alpha, motif)[2]
    regime = args.regime
    if regime == "auto":
        regime = "sparse" if advice == "sparse_ok" else "dense"
    sseed = _smoother_seed(args.seed)
    if regime == "sparse":
        rep = ci_network_sparse(graph, motif, design, args.beta, args.seed, rho, args.mu0)
    else:
        rep = ci_network(graph, motif, design, args.beta, args.c_delta, sseed, rho, args.force)
        if args.mu0 is not None:
            rep.pvalue = pvalue_network(graph, motif, design, args.mu0, args.c_delta, sseed)
            rep.mu0 = args.mu0
    rep.seed = args.seed
    out = rep.to_dict()
    out.update({"regime": rep.extra["regime"], "regime_advice": rep.extra["regime_advice"],
                "n": graph.n, "n_edges": graph.n_edges, "requested_regime": args.regime, "force": args.force,
                "c_delta": args.c_delta, "design_size": design.size, "source": source})
    return out


def cmd_simulate(args):
    from .validate import MCConfig, cdf_study, coverage_experiment

    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {args.config}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}: invalid JSON ({exc})") from exc
    mode = raw.pop("mode", args.mode)
    if args.workers is not None:
        raw["workers"] = args.workers
    try:
        cfg = MCConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid simulation config: {exc}") from exc
    if mode == "cdf":
        res = cdf_study(cfg)
        if args.grid_csv:
            res.write_grid_csv(args.grid_csv)
    elif mode == "coverage":
        res = coverage_experiment(cfg)
    else:
        raise InputError(f"unknown simulation mode {mode!r}")
    out = res.to_dict()
    out["mode"] = mode
    out["grid_csv"] = args.grid_csv
    return out


# ---------------------------------------------------------------------------
# plumbing


def _write_rows(path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows([[float(v) for v in row] for row in rows])
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _common(p, data=True):
    if data:
        p.add_argument("--data", required=True, help="CSV file, one observation per row")
        p.add_argument("--header", action="store_true", help="skip the first CSV row")
        p.add_argument("--delimiter", default=",")
        p.add_argument("--kernel", required=True)
        p.add_argument("--kernel-param", type=_kv, action="append", metavar="KEY=VALUE")
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", default=None, help="write JSON here instead of stdout")
    p.add_argument("--workers", type=int, default=1)


def _inference_flags(p):
    p.add_argument("--scheme", choices=SCHEMES, default="deterministic")
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--c-delta", type=float, default=DEFAULT_C_DELTA)
    p.add_argument("--case", choices=("nondegenerate", "degenerate", "auto"), default="nondegenerate")
    p.add_argument("--grid-csv", default=None, help="write (u, G(u)) pairs of the fitted expansion")


def build_parser():
    parser = _Parser(prog="ureduce", description="Inference for reduced U-statistics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("infer", help="estimate, interval and optional p-value")
    _common(p)
    _inference_flags(p)
    p.add_argument("--mu0", type=float, default=None)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("ci", help="Cornish-Fisher confidence interval")
    _common(p)
    _inference_flags(p)
    p.set_defaults(func=cmd_ci, mu0=None)

    p = sub.add_parser("test", help="two-sided test of mu = mu0")
    _common(p)
    _inference_flags(p)
    p.add_argument("--mu0", type=float, required=True)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("k0", help="estimate the degeneracy order")
    _common(p)
    p.add_argument("--c0", type=float, default=0.25)
    p.set_defaults(func=cmd_k0)

    p = sub.add_parser("design", help="emit or inspect a design")
    p.add_argument("action", choices=("emit", "inspect"))
    _common(p, data=False)
    p.add_argument("--scheme", choices=SCHEMES, default="deterministic")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--design-file", default=None)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("network", help="motif-frequency inference on a graph")
    _common(p, data=False)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--edge-list", default=None)
    src.add_argument("--graphon", choices=("block",), default=None)
    p.add_argument("--p-within", type=float, default=0.6)
    p.add_argument("--p-between", type=float, default=0.2)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--shares", type=float, nargs="+", default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    m = p.add_mutually_exclusive_group()
    m.add_argument("--motif", default="triangle")
    m.add_argument("--motif-file", default=None)
    p.add_argument("--scheme", choices=SCHEMES, default="J1")
    p.add_argument("--beta", type=float, default=0.05)
    p.add_argument("--mu0", type=float, default=None)
    p.add_argument("--c-delta", type=float, default=DEFAULT_C_DELTA)
    p.add_argument("--regime", choices=("auto", "dense", "sparse"), default="auto")
    p.add_argument("--force", action="store_true", help="run the dense interval against sparse advice")
    p.set_defaults(func=cmd_network)

    p = sub.add_parser("simulate", help="run a Monte Carlo study from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=("cdf", "coverage"), default="cdf")
    p.add_argument("--grid-csv", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_simulate)
    return parser


def _check(args):
    if getattr(args, "beta", None) is not None and not 0 < args.beta < 1:
        raise InputError("--beta must lie in (0, 1)")
    if getattr(args, "workers", None) is not None and args.workers < 1:
        raise InputError("--workers must be >= 1")
    if args.command == "design" and args.action == "emit" and (args.n is None or args.r is None):
        raise InputError("design emit needs --n and --r")
    if args.command == "network":
        args.rho_given = args.rho is not None
        if args.rho is None:
            args.rho = 1.0 if args.graphon else None


def _emit(obj, path):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=True) + "\n"
    if path:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise InputError(f"cannot write {path}: {exc.strerror or exc}") from exc
    else:
        sys.stdout.write(text)


def _fail(code, stage, exc):
    payload = {"error": type(exc).__name__, "stage": stage, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _check(args)
        result = args.func(args)
        if getattr(args, "workers", None) is not None:
            result.setdefault("workers", args.workers)
        result["command"] = args.command
        _emit(result, args.output)
    except StatisticalError as exc:
        return _fail(2, args.command, exc)
    except (OSError, InputError, GraphFormatError) as exc:
        return _fail(1, args.command, exc)
    except (UReduceError, ValueError, KeyError, TypeError) as exc:
        # invalid parameters (unknown kernel, alpha outside (1, r], ...)
        return _fail(1, args.command, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
