"""Command-line interface.

Commands read a JSON config describing the model and game, run the
requested solver/simulation, and emit JSON or CSV.  Outputs are
deterministic given the config (seeds included): JSON keys are sorted and
floats are written in shortest round-trip form.

Exit codes: 0 success/pass, 1 validation failure, 2 solver failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import asymmetric as asym
from . import errors as err
from . import figdata
from . import model as mod
from . import simulate as simu
from . import symmetric as sym
from .tableio import SweepTable, format_float

_VALIDATION_ERRORS = (
    err.InvalidConfig,
    err.NonPositiveSigma,
    err.DriftDerivativeTooLarge,
    err.NonPositiveDriftAtZero,
    err.NoExtinctionBound,
)

EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_VERIFICATION = 3


def _emit_json(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_csv(header, rows, out: str | None) -> None:
    lines = [",".join(header)]
    lines += [",".join(format_float(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_config(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise err.InvalidConfig("config root must be a JSON object")
    return doc


def _section(cfg: dict, name: str, allowed: set, required: set = frozenset()) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise err.InvalidConfig(f"config section {name!r} must be an object")
    unknown = set(sec) - allowed
    if unknown:
        raise err.InvalidConfig(f"unknown keys in {name!r}: {sorted(unknown)}")
    missing = required - set(sec)
    if missing:
        raise err.InvalidConfig(f"missing keys in {name!r}: {sorted(missing)}")
    return sec


def _check_top_level(cfg: dict, allowed: set) -> None:
    unknown = set(cfg) - allowed
    if unknown:
        raise err.InvalidConfig(f"unknown top-level config keys: {sorted(unknown)}")


def _model_game(cfg: dict, need_game: bool = True):
    if "model" not in cfg:
        raise err.InvalidConfig("config needs a 'model' section")
    coeffs = mod.model_from_json(cfg["model"])
    game = None
    if need_game:
        if "game" not in cfg:
            raise err.InvalidConfig("config needs a 'game' section")
        game = mod.game_from_json(cfg["game"])
    return coeffs, game


def cmd_validate(args) -> int:
    cfg = _load_config(args.config)
    _check_top_level(cfg, {"model", "game", "validate"})
    coeffs, game = _model_game(cfg)
    grid = _section(cfg, "validate", {"x_max", "points"})
    report = mod.validate_assumptions(coeffs, game, grid or None,
                                      raise_on_failure=False)
    _emit_json({
        "passed": report.passed,
        "violations": [list(v) for v in report.violations],
        "c_bound": report.c_bound,
        "linear_growth_C": report.linear_growth_C,
    }, args.out)
    return 0 if report.passed else EXIT_VALIDATION


def _value_grid(eq_x_max: float, spec: dict) -> np.ndarray:
    x_hi = float(spec.get("max", eq_x_max))
    pts = int(spec.get("points", 200))
    return np.linspace(0.0, x_hi, pts)


def cmd_solve_sym(args) -> int:
    cfg = _load_config(args.config)
    _check_top_level(cfg, {"model", "game", "solve"})
    coeffs, game = _model_game(cfg)
    opts = _section(cfg, "solve", {"engine", "values_csv", "x_grid"})
    tol = args.tol if args.tol is not None else 1e-10
    eq = sym.solve_symmetric(coeffs, game, engine=opts.get("engine", "auto"),
                             tol=tol)
    bench = sym.singular_benchmark(coeffs, game.r,
                                   engine=opts.get("engine", "auto"), tol=tol)
    _emit_json({
        "b_hat": eq.b_hat,
        "D1": eq.D1,
        "D4": eq.D4,
        "b_star": bench.b_star,
        "C_star": bench.C_star,
    }, args.out)
    if "values_csv" in opts:
        xs = _value_grid(min(eq.x_max, 4.0 * max(eq.b_star, 1.0)),
                         opts.get("x_grid", {}))
        rows = [(x, eq.value(x), eq.value_prime(x)) for x in xs]
        _emit_csv(("x", "V", "V_prime"), rows, opts["values_csv"])
    return 0


def cmd_solve_asym(args) -> int:
    cfg = _load_config(args.config)
    _check_top_level(cfg, {"model", "game", "solve"})
    coeffs, game = _model_game(cfg)
    opts = _section(cfg, "solve",
                    {"damping", "tol", "max_iter", "restarts", "values_csv", "x_grid"})
    eq = asym.solve_asymmetric(
        coeffs, game,
        damping=float(opts.get("damping", 0.5)),
        tol=float(opts.get("tol", 1e-8)),
        max_iter=int(opts.get("max_iter", 500)),
        restarts=int(opts.get("restarts", 8)),
    )
    _emit_json({
        "thresholds": list(eq.thresholds_in_input_order()),
        "thresholds_sorted": list(eq.thresholds),
        "order": list(eq.params.order),
        "E1": list(eq.E1),
        "E4": list(eq.E4),
        "residual": eq.residual,
        "iterations": eq.iterations,
    }, args.out)
    if "values_csv" in opts:
        xs = _value_grid(min(eq.x_max, 4.0 * max(float(eq.thresholds.max()), 1.0)),
                         opts.get("x_grid", {}))
        rows = [(x, *(eq.values[i](x) for i in range(game.n))) for x in xs]
        header = ("x",) + tuple(f"V{i + 1}" for i in range(game.n))
        _emit_csv(header, rows, opts["values_csv"])
    return 0


def _sweep_points_parallel(fn, points, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, points))
    return [fn(p) for p in points]


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    _check_top_level(cfg, {"model", "game", "sweep"})
    coeffs, _ = _model_game(cfg, need_game=False)
    opts = _section(cfg, "sweep",
                    {"kind", "r", "K", "K_bar", "n", "n_min", "n_max",
                     "K_values", "K1", "K2_values", "engine"},
                    required={"kind", "r"})
    kind = opts["kind"]
    r = float(opts["r"])
    engine = opts.get("engine", "auto")
    threads = args.threads

    if kind == "n":
        n_range = range(int(opts["n_min"]), int(opts["n_max"]) + 1)
        table = _parallel_sweep_n(coeffs, r, float(opts["K"]), n_range,
                                  engine, threads, fixed_total=False)
    elif kind == "n-fixed-total":
        n_range = range(int(opts["n_min"]), int(opts["n_max"]) + 1)
        table = _parallel_sweep_n(coeffs, r, float(opts["K_bar"]), n_range,
                                  engine, threads, fixed_total=True)
    elif kind == "K":
        table = sym.sweep_K(coeffs, r, int(opts["n"]),
                            [float(v) for v in opts["K_values"]], engine=engine)
    elif kind == "K2":
        table = asym.sweep_K2(coeffs, r, float(opts["K1"]),
                              [float(v) for v in opts["K2_values"]])
    else:
        raise err.InvalidConfig(f"unknown sweep kind {kind!r}")
    _emit_csv(table.header, table.rows, args.out)
    return 0


def _parallel_sweep_n(coeffs, r, K_or_bar, n_range, engine, threads,
                      fixed_total: bool) -> SweepTable:
    # K2 sweeps warm-start sequentially; the n sweeps are independent per
    # point and dispatch to a thread pool, keeping output order by n.
    if not threads or threads <= 1:
        if fixed_total:
            return sym.sweep_n_fixed_total(coeffs, r, K_or_bar, n_range, engine)
        return sym.sweep_n(coeffs, r, K_or_bar, n_range, engine)

    def one(n):
        K = K_or_bar / n if fixed_total else K_or_bar
        return sym.solve_symmetric(coeffs, mod.symmetric_game(n, r, K), engine=engine)

    eqs = _sweep_points_parallel(one, list(n_range), threads)
    samples = np.linspace(0.2 * eqs[0].b_star, 2.0 * eqs[0].b_star, 10)
    rows = []
    n_bar = None
    for n, eq in zip(n_range, eqs):
        scale = n if fixed_total else 1
        if n_bar is None and eq.b_hat == 0.0:
            n_bar = n
        rows.append([n, eq.b_hat] + [scale * eq.value(x) for x in samples])
    tag = "nV" if fixed_total else "V"
    header = ("n", "b_hat") + tuple(f"{tag}_x{j}" for j in range(len(samples)))
    return SweepTable(header, np.array(rows),
                      {"n_bar": n_bar, "x0_samples": samples})


def _sim_config(opts: dict, seed_flag) -> simu.SimConfig:
    seed = seed_flag if seed_flag is not None else int(opts.get("seed", 0))
    return simu.SimConfig(
        x0=float(opts["x0"]),
        dt=float(opts["dt"]),
        horizon=float(opts["horizon"]) if "horizon" in opts else None,
        paths=int(opts.get("paths", 100_000)),
        seed=seed,
        antithetic=bool(opts.get("antithetic", False)),
    )


_SIM_KEYS = {"x0", "dt", "horizon", "paths", "seed", "antithetic",
             "profile", "agent"}


def _resolve_profile(opts, coeffs, game):
    prof = opts.get("profile", "equilibrium")
    if prof == "equilibrium":
        if game.symmetric:
            b = sym.solve_symmetric(coeffs, game).b_hat
            return np.full(game.n, b)
        return asym.solve_asymmetric(coeffs, game).thresholds
    arr = np.asarray([float(v) for v in prof])
    if len(arr) != game.n:
        raise err.InvalidConfig("profile length must equal the agent count")
    return arr


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    _check_top_level(cfg, {"model", "game", "sim"})
    coeffs, game = _model_game(cfg)
    opts = _section(cfg, "sim", _SIM_KEYS, required={"x0", "dt"})
    profile = _resolve_profile(opts, coeffs, game)
    agent = int(opts.get("agent", 0))
    est = simu.estimate_reward(coeffs, game, profile, agent,
                               _sim_config(opts, args.seed))
    _emit_json({
        "mean": est.mean,
        "std_error": est.std_error,
        "paths": est.paths,
        "absorbed_fraction": est.absorbed_fraction,
        "tail_bound": est.tail_bound,
    }, args.out)
    return 0


def cmd_verify_nash(args) -> int:
    cfg = _load_config(args.config)
    _check_top_level(cfg, {"model", "game", "verify"})
    coeffs, game = _model_game(cfg)
    opts = _section(cfg, "verify",
                    _SIM_KEYS | {"deviations", "deviation_count",
                                 "deviation_span", "c_bias", "deviations_csv"},
                    required={"x0", "dt"})
    profile = _resolve_profile(opts, coeffs, game)
    agent = int(opts.get("agent", 0))
    if "deviations" in opts:
        grid = [float(v) for v in opts["deviations"]]
    else:
        count = int(opts.get("deviation_count", 11))
        span = float(opts.get("deviation_span", 2.0))
        center = profile[agent] if profile[agent] > 0 else 1.0
        grid = list(np.linspace(0.0, span * center, count))
    verdict = simu.verify_nash(coeffs, game, profile, agent,
                               float(opts["x0"]), grid,
                               _sim_config(opts, args.seed),
                               c_bias=float(opts.get("c_bias", 1.0)))
    _emit_json({
        "agent": verdict.agent,
        "deviations_tested": list(verdict.deviations_tested),
        "max_excess": verdict.max_excess,
        "passes": verdict.passes,
        "std_error": verdict.std_error,
        "bias_allowance": verdict.bias_allowance,
        "equilibrium_mean": verdict.equilibrium.mean,
    }, args.out)
    if "deviations_csv" in opts:
        rows = list(zip(verdict.deviations_tested, verdict.excesses,
                        verdict.std_errors))
        _emit_csv(("b_prime", "excess", "std_error"), rows,
                  opts["deviations_csv"])
    return 0 if verdict.passes else EXIT_VERIFICATION


# --- figure reproduction -----------------------------------------------------

_REPRO_MU, _REPRO_SIGMA2, _REPRO_R = 4.0, 2.0, 0.05


def _reproduce_table(figure: str) -> tuple[tuple, np.ndarray]:
    coeffs = mod.constant(_REPRO_MU, math.sqrt(_REPRO_SIGMA2))
    r = _REPRO_R
    if figure == "fig2-left":
        tab = sym.sweep_n(coeffs, r, 0.1, range(1, 51))
        return ("n", "b_hat"), tab.rows[:, :2]
    if figure == "fig2-right":
        rows = []
        for k_bar in (3.5, 0.1):
            tab = sym.sweep_n_fixed_total(coeffs, r, k_bar, range(1, 51))
            rows += [[k_bar, n, b] for n, b in tab.rows[:, :2]]
        return ("k_bar", "n", "b_hat"), np.array(rows)
    if figure == "fig3":
        grid = [round(0.0005 * k, 6) for k in range(0, 301)]
        tab = sym.sweep_K(coeffs, r, 30, grid)
        return ("K", "b_hat"), tab.rows
    if figure == "asym-thresholds":
        grid = [round(0.005 * k, 6) for k in range(0, 41)]
        tab = asym.sweep_K2(coeffs, r, 0.1, grid)
        k2 = tab.column("K2")
        return ("K2", "b2_hat", "b1_hat"), np.column_stack(
            [k2, tab.column("b2_hat"), tab.column("b1_hat")])
    raise err.InvalidConfig(f"unknown figure {figure!r}")


def reproduce_deviation(figure: str, rows: np.ndarray) -> float:
    """Max abs difference of the threshold columns vs the embedded table."""
    header, ref = figdata.load(figure)
    if rows.shape != ref.shape:
        raise err.InvalidConfig(
            f"{figure}: computed shape {rows.shape} != embedded {ref.shape}")
    return float(np.max(np.abs(rows - ref)))


def cmd_reproduce(args) -> int:
    header, rows = _reproduce_table(args.figure)
    dev = reproduce_deviation(args.figure, rows)
    _emit_csv(header, rows, args.out)
    print(f"{args.figure}: {len(rows)} rows, max deviation vs embedded data "
          f"= {dev:.3e}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="commonpool",
        description="Threshold Nash equilibria for stochastic resource "
                    "extraction games: solvers, sweeps, Monte-Carlo checks.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, needs_config=True):
        sp = sub.add_parser(name)
        if needs_config:
            sp.add_argument("--config", required=True, help="JSON config path")
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker pool size for sweep points")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the simulation seed")
        sp.add_argument("--tol", type=float, default=None,
                        help="override the solver tolerance")
        sp.set_defaults(fn=fn)
        return sp

    add("validate", cmd_validate)
    add("solve-sym", cmd_solve_sym)
    add("solve-asym", cmd_solve_asym)
    add("sweep", cmd_sweep)
    add("simulate", cmd_simulate)
    add("verify-nash", cmd_verify_nash)
    rp = add("reproduce", cmd_reproduce, needs_config=False)
    rp.add_argument("--figure", required=True, choices=figdata.FIGURES)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except err.CommonPoolError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
