"""Command-line interface: ``paneitz-reduce <command> --config FILE [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from . import driver
from .bubble import bubble_residuals, gram_limit_check
from .driver import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _emit(text: str, out: str | None) -> None:
    if out:
        driver.write_text(out, text)
    else:
        sys.stdout.write(text)


def _table(rows: list[dict], out: str | None, columns: list[str] | None = None) -> None:
    if out and out.endswith(".json"):
        _emit(driver.to_json(rows), out)
    else:
        _emit(driver.to_csv(rows, columns), out)


def _config(args, use_n: bool = True) -> driver.RunConfig:
    overrides = {"n": args.n if use_n else None, "model": args.model, "variant": args.regime, "preset": args.preset,
                 "mode": args.mode}
    if args.eps is not None:
        overrides["eps"] = args.eps
    return driver.load_config(args.config, overrides)


def _eps_values(args, config) -> list[float]:
    return list(args.eps) if args.eps is not None else list(config.eps)


def cmd_constants(args) -> int:
    config = _config(args, use_n=False)
    explicit = args.config or args.preset or args.model
    kind = config.model if explicit else "sphere"
    dims = [args.n] if args.n is not None else range(5, 14)
    columns = ["n", "a_P", "b", "c", "Q_g", "omega_n", "alpha_n", "K_n", "C_n"]
    _table(driver.constants_rows(kind, dims), args.out, columns)
    return EXIT_OK


def cmd_bubble_check(args) -> int:
    dims = [args.n] if args.n is not None else [5, 6, 7, 8]
    rows = []
    for n in dims:
        res = bubble_residuals(n)
        res["gram_offdiag"] = gram_limit_check(n, 1e-3)["offdiag_ratio"]
        rows.append(res)
    _table(rows, args.out, ["n", "residual_U", "residual_V", "gram_offdiag"])
    return EXIT_OK


def cmd_reduce(args) -> int:
    config = _config(args)
    eps = _eps_values(args, config)
    if not eps:
        raise ConfigError("reduce needs an eps value")
    t = 1.0 if args.t is None else args.t
    problem = driver.make_problem(config)
    result = driver.reduce_diagnostics(config, eps[0], t, problem)
    _emit(driver.to_json(result), args.out)
    return EXIT_OK


def cmd_landscape(args) -> int:
    config = _config(args)
    t_grid = [args.t] if args.t is not None else None
    rows = driver.landscape_rows(config, _eps_values(args, config), t_grid)
    _table(rows, args.out, ["eps", "t", "I_eps", "J_no_phi", "D", "G_pred", "misfit"])
    return EXIT_OK


def cmd_solve(args) -> int:
    config = _config(args)
    report = config.report()
    problem = driver.make_problem(config) if config.mode == driver.FULL else None
    records = []
    for eps in _eps_values(args, config):
        cp = driver.find_critical_point(config, eps, problem, report)
        entry = {"eps": eps, "t0": report.t0, "t_star": cp.t, "xi_star": cp.xi, "certificate": cp.certificate,
                 "method": cp.method, "evaluations": cp.evaluations}
        if problem is not None:
            rec, _ = driver.assemble_solution(config, eps, cp.t, cp.xi, problem)
            entry.update(rec.as_dict())
        records.append(entry)
    _emit(driver.to_json({"regime": driver.regime_label(config), "solutions": records}), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _config(args)
    report = driver.sweep(config)
    text = driver.to_json(report)
    out = args.out or config.out
    if out:
        base = out[:-5] if out.endswith(".json") else out
        driver.write_text(base + ".json", text)
        driver.write_text(base + ".csv", driver.to_csv(report["rows"], driver.SWEEP_COLUMNS))
    else:
        sys.stdout.write(text)
    for row in report["rows"]:
        if row["status"] != "ok":
            print(f"eps={row['eps']:g}: {row['reason']}", file=sys.stderr)
    return EXIT_NUMERIC if report["all_failed"] else EXIT_OK


COMMANDS = {
    "constants": cmd_constants,
    "bubble-check": cmd_bubble_check,
    "reduce": cmd_reduce,
    "landscape": cmd_landscape,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
}


def _eps_list(text: str) -> list[float]:
    try:
        return driver._float_list(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from err


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paneitz-reduce",
                                     description="Blow-up families for perturbed Paneitz-type equations.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="flat 'key = value' configuration file")
    parser.add_argument("--preset", help=f"one of: {', '.join(driver.PRESETS)}")
    parser.add_argument("--n", type=int, help="dimension")
    parser.add_argument("--eps", type=_eps_list, help="eps value or comma-separated list")
    parser.add_argument("--t", type=float, help="scale parameter t")
    parser.add_argument("--model", help="sphere or torus")
    parser.add_argument("--regime", help="theorem1 or theorem2")
    parser.add_argument("--mode", help="full or semi")
    parser.add_argument("--out", help="output file (.json for JSON, otherwise CSV where tabular)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, ValueError) as err:
        print(f"numerical failure: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
