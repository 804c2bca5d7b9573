"""``qtdp`` command line: check, solve, compare.

Exit codes: 0 ok, 1 numeric failure (or failed check), 2 input error,
3 certificate failure during ``solve``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import oracle
from .core import AssumptionError, ModelError
from .export import jsonable, write_json, write_policy_csv, write_q_csv, write_value_csv
from .models import BuiltModel, ConfigError, build_model, load_config
from .q_transform import DEFAULT_MAX_ITER, DEFAULT_TOL, greedy_policy, measure_contraction, \
    recover_value, solve_fixed_point
from .risk_sensitive import check_assumption_one_rs, solve_fixed_point_rs, verify_monotone_assumptions
from .weighted_norm import CertificateError, auto_weight_linear, certify_assumption_three, \
    solve_fixed_point_weighted

log = logging.getLogger("qtdp")

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT, EXIT_CERT = 0, 1, 2, 3
SOLVERS = ("additive", "weighted", "risk")
LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class InputError(Exception):
    pass


def _setup_logging():
    level = LOG_LEVELS.get(os.environ.get("QTDP_LOG", "quiet").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _load(path) -> BuiltModel:
    try:
        return build_model(load_config(path))
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from None
    except OSError as exc:
        raise InputError(str(exc)) from None
    except (ConfigError, ModelError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid config: {exc}") from None


def _solver_name(model: BuiltModel, requested: str | None) -> str:
    if requested:
        return requested
    if model.config.solver:
        if model.config.solver not in SOLVERS:
            raise InputError(f"unknown solver {model.config.solver!r}")
        return model.config.solver
    if model.config.kind == "rs_growth":
        return "risk"
    return "weighted" if "kappa" in model.config.extras else "additive"


def _risk(model: BuiltModel):
    if model.risk is None:
        raise InputError("risk solver needs extras.risk_gamma in the config")
    return model.risk


def _weight(model: BuiltModel):
    """Weight and certificate for the weighted solvers (raises CertificateError)."""
    if model.kappa is not None:
        return model.kappa, certify_assumption_three(model.dp, model.kappa)
    spec = model.config.extras.get("kappa", {})
    return auto_weight_linear(model.dp, float(spec.get("p", 1.0)), float(spec.get("q_init", 2.0)))


def _certificates(model: BuiltModel, solver: str) -> tuple[dict, bool]:
    """Report the certificates the solver relies on, and whether all of them hold."""
    dp = model.dp
    report: dict = {"solver": solver, "kind": model.config.kind}
    ok = True
    if solver == "risk":
        a1 = check_assumption_one_rs(dp, _risk(model))
        report["assumption_one_rs"] = a1.to_dict()
        ok = a1.holds
    else:
        a1 = dp.assumption_one
        report["assumption_one"] = a1.to_dict()
        ok = a1.holds
    weighted = solver == "weighted" or (solver == "risk" and
                                        (model.kappa is not None or "kappa" in model.config.extras))
    if weighted:
        try:
            _, cert = _weight(model)
        except CertificateError as exc:
            cert = exc.certificate
            report["weighted_error"] = str(exc)
        report["weighted_certificate"] = cert.to_dict() if cert is not None else None
        ok = ok and cert is not None and cert.holds
        if solver == "risk":
            mono = verify_monotone_assumptions(dp)
            report["monotone_flags"] = mono.to_dict()
            ok = ok and mono.holds
    return report, ok


def cmd_check(args) -> int:
    model = _load(args.config)
    report, ok = _certificates(model, _solver_name(model, args.solver))
    if args.trials > 0 and model.dp.assumption_one.holds:
        report["measured_contraction"] = measure_contraction(model.dp, args.trials, args.seed)
        report["seed"] = args.seed
    report["holds"] = ok
    _emit(report)
    return EXIT_OK if ok else EXIT_NUMERIC


def _solve(model: BuiltModel, solver: str, tol: float, max_iter: int):
    dp = model.dp
    extra: dict = {}
    if solver == "additive":
        g, rep = solve_fixed_point(dp, tol=tol, max_iter=max_iter)
    elif solver == "weighted":
        kappa, cert = _weight(model)
        extra["weighted_certificate"] = cert.to_dict()
        g, rep = solve_fixed_point_weighted(dp, kappa, tol=tol, max_iter=max_iter, certificate=cert)
    else:
        risk = _risk(model)
        kappa = cert = None
        if model.kappa is not None or "kappa" in model.config.extras:
            kappa, cert = _weight(model)
            extra["weighted_certificate"] = cert.to_dict()
        g, rep = solve_fixed_point_rs(dp, risk, kappa=kappa, tol=tol, max_iter=max_iter,
                                      certificate=cert)
    return g, rep, extra


def cmd_solve(args) -> int:
    model = _load(args.config)
    solver = _solver_name(model, args.solver)
    if solver == "risk":
        _risk(model)
    dp = model.dp
    try:
        g, rep, extra = _solve(model, solver, args.tol, args.max_iter)
    except AssumptionError as exc:
        _emit({"error": str(exc), "solver": solver})
        return EXIT_CERT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    v = recover_value(dp, g)
    sigma = greedy_policy(dp, g)
    write_q_csv(out / "g_star.csv", dp, g)
    write_value_csv(out / "value.csv", dp, v)
    write_policy_csv(out / "policy.csv", dp, sigma)
    report = {"solver": solver, "kind": model.config.kind, "beta": dp.beta,
              "n_states": dp.n_states, "n_actions": dp.n_actions, "tol": args.tol,
              **rep.to_dict(), **extra}
    write_json(out / "report.json", report)
    _emit({k: report[k] for k in ("solver", "iterations", "stop_reason", "certified_error",
                                  "measured_modulus", "modulus")})
    return EXIT_OK if rep.stop_reason == "tolerance" else EXIT_NUMERIC


def _compare_truncate(model, args) -> dict:
    dp = model.dp
    g, rep = solve_fixed_point(dp, tol=args.tol, max_iter=args.max_iter)
    v = recover_value(dp, g)
    horizon = 500 if args.horizon is None else args.horizon
    vt, tail = oracle.truncated_bellman(dp, horizon)
    mask = np.isfinite(v)
    disc = float(np.max(np.abs(vt[mask] - v[mask])))
    bound = tail + rep.certified_error + 1e-8
    ok = disc <= bound and tail <= args.max_tail
    return {"oracle": "truncate", "horizon": horizon, "discrepancy": disc, "bound": bound,
            "tail": tail, "max_tail": args.max_tail, "ok": ok}


def _compare_enumerate(model, args) -> dict:
    dp = model.dp
    count = oracle.policy_count(dp)
    if count > args.limit:
        raise InputError(f"{count} policies exceed the enumeration limit {args.limit}")
    g, rep = solve_fixed_point(dp, tol=args.tol, max_iter=args.max_iter)
    v = recover_value(dp, g)
    horizon = 300 if args.horizon is None else args.horizon
    res = oracle.enumeration_check(dp, v, greedy_policy(dp, g), horizon)
    bound = res["tail"] + rep.certified_error + 1e-8
    ok = res["discrepancy"] <= bound and res["greedy_gap"] <= bound and res["tail"] <= args.max_tail
    return {"oracle": "enumerate", "horizon": horizon, "policies": count, **res, "bound": bound,
            "max_tail": args.max_tail, "ok": ok}


def _compare_closed_form(model, args) -> dict:
    cfg = model.config
    R = oracle.cake_eating_params(cfg)
    if R is None:
        raise InputError("closed-form oracle needs a deterministic log-utility savings config "
                         "with zero income")
    dp = model.dp
    g, rep = solve_fixed_point(dp, tol=args.tol, max_iter=args.max_iter)
    res = oracle.cake_eating_comparison(dp, recover_value(dp, g), greedy_policy(dp, g), R)
    ok = res["max_policy_steps"] <= 2 and res["max_value_ratio"] <= 10
    return {"oracle": "closed-form", **res, "policy_steps_bound": 2, "value_ratio_bound": 10,
            "ok": ok}


def cmd_compare(args) -> int:
    model = _load(args.config)
    run = {"truncate": _compare_truncate, "enumerate": _compare_enumerate,
           "closed-form": _compare_closed_form}[args.oracle]
    try:
        report = run(model, args)
    except AssumptionError as exc:
        _emit({"error": str(exc)})
        return EXIT_NUMERIC
    _emit(report)
    return EXIT_OK if report["ok"] else EXIT_NUMERIC


def _emit(doc: dict) -> None:
    print(json.dumps(jsonable(doc), indent=2, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qtdp", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None,
                   help="cap BLAS/OpenMP threads (default: library default)")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="cap BLAS/OpenMP threads; results do not depend on it")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="report the assumption certificates for a config")
    c.add_argument("config")
    c.add_argument("--solver", choices=SOLVERS)
    c.add_argument("--trials", type=int, default=0, help="random contraction trials (0: skip)")
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("solve", parents=[common], help="solve for the fixed point and export tables")
    s.add_argument("config")
    s.add_argument("--solver", choices=SOLVERS)
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    s.add_argument("--out", default="qtdp_out")
    s.set_defaults(func=cmd_solve)

    k = sub.add_parser("compare", parents=[common], help="compare the solution with an independent oracle")
    k.add_argument("config")
    k.add_argument("--oracle", choices=("truncate", "enumerate", "closed-form"), required=True)
    k.add_argument("--horizon", type=int, default=None)
    k.add_argument("--tol", type=float, default=DEFAULT_TOL)
    k.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    k.add_argument("--max-tail", type=float, default=1e-6,
                   help="fail when the oracle's own truncation bound exceeds this")
    k.add_argument("--limit", type=int, default=oracle.ENUMERATION_LIMIT)
    k.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        with threadpool_limits(limits=args.threads):
            return args.func(args)
    except (InputError, ConfigError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
