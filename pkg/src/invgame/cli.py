"""Command-line interface: equilibrium inspection, data generation, fitting, experiments.

Exit codes: 0 success, 2 usage/parse/I-O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, DatasetParseError
from .equilibrium import (
    MaxEntropyError,
    alpha_beta,
    ce_vertices,
    entropy,
    max_entropy_ce,
    max_entropy_ce_from_constraints,
    vertices_from_payoffs,
)
from .estimation import FITTERS, FitError, make_design, nll
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    SweepGrid,
    decision_accuracy,
    emit_report,
    mae_rmse,
    run_experiment,
    tv_distance,
)
from .game import DegenerateGameError, constraint_matrix, load_features, load_game
from .lbr import (
    ConvergenceError,
    logit_responses,
    responses_from_payoffs,
    simulate_chain,
    stationary_closed_form,
    stationary_from_responses,
    stationary_power_iteration,
    transition_matrix,
)
from .optimize import FitConfig, tomllib
from .scenarios import (
    CHICKEN_TRUTH,
    TRAFFIC_TRUTH,
    chicken_dare_game,
    chicken_features,
    sample_iid,
    signaled_sample,
    sweep_traffic_scenarios,
    traffic_features_from_tau,
    traffic_game,
    uncoordinated_sample,
)

OUTPUT_ENV = "INVGAME_OUTPUT_DIR"
DEFAULT_SEED = 42

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE, details=None):
        super().__init__(message)
        self.code = code
        self.details = details or {}


def _fmt(x) -> str:
    return np.array2string(np.asarray(x), precision=6, suppress_small=True, separator=", ")


def _emit(obj, as_json: bool, text: str) -> None:
    print(json.dumps(obj, indent=1) if as_json else text)


def _write_dataset(d: Dataset, out: str | None) -> None:
    if out is None or out == "-":
        for rec in d.records():
            print(json.dumps(rec))
        return
    path = Path(out)
    if path.suffix == ".csv":
        d.to_csv(path)
    else:
        d.to_jsonl(path)
    print(f"wrote {len(d)} records to {path}", file=sys.stderr)


def _resolve_features(spec: str):
    """'chicken', 'traffic' (per-record tau) or a JSON game spec path."""
    if spec == "chicken":
        return chicken_features()
    if spec == "traffic":
        return traffic_features_from_tau
    return load_features(spec)


def _fit_config(args) -> FitConfig:
    cfg = FitConfig.load(args.config) if args.config else FitConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


# -- subcommands -------------------------------------------------------------------


def cmd_eq(args) -> int:
    g = load_game(args.game)
    out: dict = {"payoffs": {"player1": g.u1.tolist(), "player2": g.u2.tolist()}}
    lines = [g.format_table()]
    try:
        ab = alpha_beta(g)
        out["alpha"], out["beta"] = ab.alpha, ab.beta
        lines.append(f"alpha = {ab.alpha!r}\nbeta  = {ab.beta!r}")
    except ValueError as exc:
        out["alpha"] = out["beta"] = None
        lines.append(f"alpha/beta: {exc}")
    try:
        V = ce_vertices(g)
        out["vertices"] = V.tolist()
        lines.append("CE vertices (a1..a4):")
        lines += [f"  v{k + 1}: {_fmt(v)}" for k, v in enumerate(V)]
    except DegenerateGameError as exc:
        out["vertices"] = None
        out["vertices_refused"] = str(exc)
        lines.append(f"CE vertices refused: {exc}")
    p = max_entropy_ce(g)
    out["max_entropy_ce"] = p.tolist()
    out["entropy"] = entropy(p)
    lines.append(f"max-entropy CE: {_fmt(p)}  (entropy {entropy(p):.6f} nats)")
    _emit(out, args.json, "\n".join(lines))
    return EXIT_OK


def cmd_lbr(args) -> int:
    g = load_game(args.game)
    lam = args.lam
    r = logit_responses(g, lam)
    P = transition_matrix(g, lam)
    closed = stationary_closed_form(g, lam)
    out = {
        "lambda": list(lam),
        "responses": r._asdict(),
        "transition_matrix": P.tolist(),
        "stationary_closed_form": closed.tolist(),
    }
    lines = [
        "responses: " + ", ".join(f"{k}={v:.6f}" for k, v in r._asdict().items()),
        "transition matrix:",
        _fmt(P),
        f"stationary (closed form): {_fmt(closed)}",
    ]
    if args.power:
        power = stationary_power_iteration(g, lam, tol=args.tol)
        out["stationary_power_iteration"] = power.tolist()
        out["tv_closed_vs_power"] = tv_distance(closed, power)
        lines.append(f"stationary (power iteration): {_fmt(power)}  TV {tv_distance(closed, power):.2e}")
    if args.simulate:
        seed = DEFAULT_SEED if args.seed is None else args.seed
        d = simulate_chain(g, lam, args.simulate, seed, args.burn_in)
        out["simulated_frequencies"] = d.frequencies().tolist()
        lines.append(f"simulated frequencies (T={len(d)}): {_fmt(d.frequencies())}")
        if args.output:
            _write_dataset(d, args.output)
    _emit(out, args.json, "\n".join(lines))
    return EXIT_OK


def cmd_gen(args) -> int:
    seed = DEFAULT_SEED if args.seed is None else args.seed
    if args.protocol == "chicken":
        w1 = args.w1 if args.w1 else CHICKEN_TRUTH[0]
        w2 = args.w2 if args.w2 else CHICKEN_TRUTH[1]
        d = sample_iid(max_entropy_ce(chicken_dare_game(w1, w2)), args.T, seed)
    elif args.protocol == "traffic":
        g = traffic_game(*args.tau)
        d = sample_iid(max_entropy_ce(g), args.T, seed, context=args.tau)
    elif args.protocol == "signal":
        if args.device:
            device = np.asarray(args.device, dtype=float)
        else:
            device = ce_vertices(traffic_game(*args.tau))[args.vertex - 1]
        d = signaled_sample(device, args.T, seed, context=args.tau)
    else:
        grid = _load_sweep(Path(args.sweep)) if args.sweep else ExperimentConfig.bundled("e4").scenario["sweep"]
        pool = sweep_traffic_scenarios(SweepGrid.from_dict(grid), args.sweep_seed)
        pick = np.random.default_rng([seed, 1]).choice(len(pool), size=args.T)
        d = uncoordinated_sample([pool[i] for i in pick], args.noise, seed)
    _write_dataset(d, args.output)
    return EXIT_OK


def _load_sweep(path: Path) -> dict:
    text = path.read_text()
    data = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
    return data.get("sweep", data)


def cmd_fit(args) -> int:
    d = Dataset.from_jsonl(args.data)
    features = _resolve_features(args.features)
    cfg = _fit_config(args)
    try:
        est = FITTERS[args.method](d, features, cfg)
    except FitError as exc:
        raise CliError(f"fit failed: {exc}", EXIT_NUMERIC, exc.diagnostics) from None
    out = est.to_dict()
    out["features"] = args.features
    out["T"] = len(d)
    text = json.dumps(out, indent=1)
    if args.output:
        Path(args.output).write_text(text + "\n")
    lines = [f"method: {est.method}", f"nll: {est.nll:.6f} (empirical {est.empirical_nll:.6f})"]
    lines += [f"w1: {_fmt(est.w1)}", f"w2: {_fmt(est.w2)}"]
    if "y" in out:
        lines.append(f"y: {_fmt(out['y'])}")
    if "lambda" in out:
        lines.append(f"lambda: {_fmt(out['lambda'])}")
    lines.append(f"fitted distribution: {_fmt(est.fitted_distribution)}")
    print(text if args.json else "\n".join(lines))
    return EXIT_OK


def _predict_records(est: dict, design) -> np.ndarray:
    w1, w2 = np.asarray(est["w1"]), np.asarray(est["w2"])
    U1, U2 = design.phi1 @ w1, design.phi2 @ w2
    method = est.get("method")
    if method == "ce-ml":
        V, codes = vertices_from_payoffs(U1, U2)
        if np.any(codes > 1):
            raise CliError("estimate does not give an (anti-)coordination game on this data", EXIT_NUMERIC)
        dists = np.einsum("v,kvl->kl", np.asarray(est["y"]), V)
    elif method == "lbr-ml":
        lam = est["lambda"]
        dists = stationary_from_responses(*responses_from_payoffs(U1, U2, lam[0], lam[1]))
    elif method == "ice":
        dists = np.array([max_entropy_ce_from_constraints(c) for c in constraint_matrix(U1, U2)])
    else:
        raise CliError(f"estimate has unknown method {method!r}")
    return dists


def cmd_eval(args) -> int:
    try:
        est = json.loads(Path(args.estimate).read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{args.estimate}: line {exc.lineno}: {exc.msg}") from None
    d = Dataset.from_jsonl(args.data)
    features = _resolve_features(args.features or est.get("features", ""))
    design = make_design(d, features)
    dists = _predict_records(est, design)
    weights = design.counts.sum(axis=1)
    pooled = weights @ dists / weights.sum()
    out = {
        "method": est["method"],
        "T": len(d),
        "nll": nll(dists, design.counts),
        "tv": tv_distance(pooled, d.frequencies()),
        "accuracy": decision_accuracy(dists[design.record_context], d),
        "model_distribution": pooled.tolist(),
        "empirical_distribution": d.frequencies().tolist(),
    }
    if args.truth:
        truth = {"chicken": CHICKEN_TRUTH, "traffic": TRAFFIC_TRUTH}.get(args.truth)
        if truth is None:
            g = load_game(args.truth)
            truth = (g.w1, g.w2)
        out["mae"], out["rmse"] = mae_rmse((np.asarray(est["w1"]), np.asarray(est["w2"])), truth)
    lines = [f"{k}: {_fmt(v) if isinstance(v, list) else v}" for k, v in out.items()]
    _emit(out, args.json, "\n".join(lines))
    return EXIT_OK


def _experiment_configs(target: str) -> list[ExperimentConfig]:
    key = target.lower()
    if key == "all":
        return [ExperimentConfig.bundled(e) for e in EXPERIMENTS]
    if key.upper() in EXPERIMENTS:
        return [ExperimentConfig.bundled(key)]
    path = Path(target)
    if not path.exists():
        raise CliError(f"{target}: no such experiment or config file")
    return [ExperimentConfig.load(path)]


def cmd_experiment(args) -> int:
    out_root = Path(args.out or os.environ.get(OUTPUT_ENV) or "results")
    for cfg in _experiment_configs(args.target):
        if args.seed is not None:
            cfg = replace(cfg, fit=replace(cfg.fit, seed=args.seed))
        if args.seeds is not None:
            cfg = replace(cfg, seeds=tuple(args.seeds))
        if args.T is not None:
            cfg = replace(cfg, T=tuple(args.T))
        report = run_experiment(cfg, jobs=args.jobs)
        paths = emit_report(report, out_root / cfg.experiment.lower())
        failed = [r for r in report.rows if r.status != "ok"]
        print(f"{cfg.experiment}: {len(report.rows)} rows -> {paths['rows'].parent}")
        print(report.format_table())
        for r in failed:
            print(f"  failed: {r.method} T={r.T} seed={r.seed}: {r.error}", file=sys.stderr)
        print()
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"random seed (default {DEFAULT_SEED})")
    common.add_argument("--json", action="store_true", help="print machine-readable JSON")

    p = argparse.ArgumentParser(
        prog="invgame",
        description="Inverse learning of utility weights in 2x2 games from observed joint actions.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    q = sub.add_parser("eq", parents=[common], help="alpha/beta, CE vertices and max-entropy CE of a game")
    q.add_argument("game", help="JSON game spec with features and weights")
    q.set_defaults(func=cmd_eq)

    q = sub.add_parser("lbr", parents=[common], help="logit best-response dynamics of a game")
    q.add_argument("game", help="JSON game spec with features and weights")
    q.add_argument("--lam", type=float, nargs=2, required=True, metavar=("L1", "L2"), help="rationality of each player")
    q.add_argument("--power", action="store_true", help="also run the power-iteration check")
    q.add_argument("--tol", type=float, default=1e-14, help="power-iteration tolerance (default 1e-14)")
    q.add_argument("--simulate", type=int, metavar="T", help="simulate T steps of the chain")
    q.add_argument("--burn-in", type=int, default=1000, help="discarded initial steps (default 1000)")
    q.add_argument("-o", "--output", help="write the simulated dataset here (.jsonl or .csv)")
    q.set_defaults(func=cmd_lbr)

    q = sub.add_parser("gen", parents=[common], help="generate a dataset")
    q.add_argument("protocol", choices=["chicken", "traffic", "signal", "uncoordinated"])
    q.add_argument("-T", type=int, default=500, help="number of records (default 500)")
    q.add_argument("-o", "--output", help="output path (.jsonl or .csv); stdout if omitted")
    q.add_argument("--tau", type=float, nargs=2, default=[2.0, 3.0], metavar=("TAU1", "TAU2"),
                   help="times to intersection for traffic/signal (default 2 3)")
    q.add_argument("--w1", type=float, nargs="+", help="chicken: player-1 weights")
    q.add_argument("--w2", type=float, nargs="+", help="chicken: player-2 weights")
    q.add_argument("--vertex", type=int, default=4, choices=range(1, 6), help="signal: CE vertex used as device (default 4)")
    q.add_argument("--device", type=float, nargs=4, help="signal: explicit device distribution over a1..a4")
    q.add_argument("--noise", type=float, default=1.0, help="uncoordinated: logistic noise scale in s (default 1.0)")
    q.add_argument("--sweep", help="uncoordinated: TOML/JSON sweep grid")
    q.add_argument("--sweep-seed", type=int, default=0, help="uncoordinated: jitter seed of the sweep (default 0)")
    q.set_defaults(func=cmd_gen)

    q = sub.add_parser("fit", parents=[common], help="fit weights to a dataset")
    q.add_argument("data", help="JSONL dataset")
    q.add_argument("--features", required=True, help="'chicken', 'traffic' (uses record tau) or a JSON game spec")
    q.add_argument("--method", required=True, choices=sorted(FITTERS), help="estimator")
    q.add_argument("--config", help="TOML/JSON fit config")
    q.add_argument("-o", "--output", help="write the estimate JSON here")
    q.set_defaults(func=cmd_fit)

    q = sub.add_parser("eval", parents=[common], help="score a fitted estimate on a dataset")
    q.add_argument("estimate", help="estimate JSON written by 'fit'")
    q.add_argument("data", help="JSONL dataset")
    q.add_argument("--features", help="override the features recorded in the estimate")
    q.add_argument("--truth", help="'chicken', 'traffic' or a JSON game spec holding true weights")
    q.set_defaults(func=cmd_eval)

    q = sub.add_parser("experiment", parents=[common], help="run a bundled or custom experiment")
    q.add_argument("target", help="e1, e2, e3, e4, all, or a TOML/JSON experiment config")
    q.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./results)")
    q.add_argument("--jobs", type=int, default=1, help="parallel worker processes (default 1)")
    q.add_argument("--seeds", type=int, nargs="+", help="override the data seeds")
    q.add_argument("-T", type=int, nargs="+", help="override the sample sizes")
    q.set_defaults(func=cmd_experiment)
    return p


_USAGE_ERRORS = (CliError, DatasetParseError, ValueError, OSError, KeyError)
_NUMERIC_ERRORS = (FitError, MaxEntropyError, ConvergenceError, FloatingPointError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _NUMERIC_ERRORS as exc:
        details = getattr(exc, "diagnostics", {})
        _report_error("numerical", exc, details)
        return EXIT_NUMERIC
    except CliError as exc:
        _report_error("numerical" if exc.code == EXIT_NUMERIC else "usage", exc, exc.details)
        return exc.code
    except _USAGE_ERRORS as exc:
        _report_error("usage", exc, {})
        return EXIT_USAGE


def _report_error(kind: str, exc: Exception, details: dict) -> None:
    msg = str(exc) if not isinstance(exc, KeyError) else f"missing field {exc}"
    if isinstance(exc, OSError) and exc.filename and str(exc.filename) not in msg:
        msg = f"{exc.filename}: {msg}"
    print(json.dumps({"error": kind, "message": msg, "details": details}, default=str), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
