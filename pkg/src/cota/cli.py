"""Batch front-end: validate models, run experiments, run the downstream task.

One JSON config file drives a run; every flag overrides the matching config
key.  Exit codes: 0 ok, 2 validation failure, 3 solver non-convergence,
4 I/O or schema problems.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .constraints import DivergenceKind
from .errors import (
    CotaError,
    EmptyFile,
    MissingColumn,
    NoConvergence,
    SchemaMismatch,
    ValidationError,
)
from .evaluation import (
    Experiment,
    GridResult,
    MethodSpec,
    grid_search,
    learn_cota,
    loo_evaluate,
    make_context,
)
from .interventions import InterventionPoset, OmegaMap, validate_omega
from .maps import AggregationMode, export_map_csv
from .model import load_model, validate_dag
from .scenarios import get_scenario, write_ebm_csvs
from .solver import CotaWeights, SolverConfig
from .evaluation import downstream_regression

log = logging.getLogger("cota")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4


def _setup_logging():
    level = os.environ.get("COTA_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr)


def _structured_error(exc) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)


def _load_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"{args.config}:{exc.lineno}: {exc.msg}") from None
    for key in ("scenario", "seed", "jobs", "out", "synthetic"):
        val = getattr(args, key, None)
        if val not in (None, False):
            cfg[key] = val
    return cfg


def _solver_config(cfg: dict) -> SolverConfig:
    block = dict(cfg.get("solver", {}))
    block.setdefault("mode", cfg.get("mode", "exact"))
    block.setdefault("z_source", cfg.get("z_source", "plan"))
    block.setdefault("seed", cfg.get("seed", 0))
    return SolverConfig(**block)


def _weights(cfg: dict) -> CotaWeights | None:
    w = cfg.get("weights")
    if w is None:
        return None
    if isinstance(w, dict):
        return CotaWeights(
            w.get("kappa", 0.0), w.get("lam", 0.0), w.get("lam_prime", 0.0), w.get("mu", 0.0)
        )
    if len(w) == 3:
        return CotaWeights.fold(*w)
    return CotaWeights(*w)


def _scenario_from_config(cfg: dict):
    name = cfg.get("scenario", "stc_np")
    if name == "ebm":
        if cfg.get("synthetic"):
            out = Path(cfg.get("out", "out")) / "synthetic_ebm"
            lrcs, wmg = write_ebm_csvs(out, seed=cfg.get("seed", 0))
            return get_scenario("ebm", lrcs_csv=lrcs, wmg_csv=wmg, n_bins=cfg.get("bins", 5))
        return get_scenario(
            "ebm",
            lrcs_csv=cfg.get("lrcs_csv"),
            wmg_csv=cfg.get("wmg_csv"),
            n_bins=cfg.get("bins", 5),
        )
    return get_scenario(name)


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    report = {"files": []}
    for path in args.models:
        entry = {"file": str(path)}
        doc = load_model(path)
        validate_dag(doc["base"].dag)
        entry["base"] = "ok"
        if "abs" in doc:
            validate_dag(doc["abs"].dag)
            entry["abs"] = "ok"
        if "omega" in doc:
            base_set = InterventionPoset.of(doc["interventions"])
            abs_set = InterventionPoset.of(doc["abs_interventions"])
            validate_omega(OmegaMap.of(doc["omega"]), base_set, abs_set)
            entry["omega"] = "ok"
        report["files"].append(entry)
    print(json.dumps(report, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _method_specs(cfg: dict, weights) -> list:
    wanted = cfg.get(
        "methods", ["cota_plan", "cota_map", "pwise", "map", "bary"] if weights else ["pwise", "map", "bary"]
    )
    div = DivergenceKind(cfg.get("divergence", "fro"))
    mode = cfg.get("mode", "exact")
    specs = []
    for name in wanted:
        if name == "cota_plan":
            specs.append(MethodSpec("cota", weights, div, AggregationMode.PLAN_AVERAGE, mode))
        elif name == "cota_map":
            specs.append(MethodSpec("cota", weights, div, AggregationMode.MAP_AVERAGE, mode))
        else:
            specs.append(MethodSpec(name))
    return specs


def _loo_row(task):
    experiment, spec, metric_kind = task
    report = loo_evaluate(replace(experiment, metric_kind=metric_kind), spec)
    return report


def cmd_run(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.get("out", "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario = _scenario_from_config(cfg)
    solver = _solver_config(cfg)
    weights = _weights(cfg)
    experiment = Experiment(
        scenario=scenario,
        cost_kind=cfg.get("cost", "omega"),
        n_base=cfg.get("n_base", 1000),
        n_abs=cfg.get("n_abs", 1000),
        repetitions=cfg.get("repetitions", 10),
        seed=cfg.get("seed", 0),
        solver=solver,
        data_backed=scenario.name == "ebm",
    )
    metrics = cfg.get("metrics", ["jsd", "wass"])

    if cfg.get("grid"):
        grid_step = cfg.get("grid_step", scenario.grid_step)
        div = DivergenceKind(cfg.get("divergence", "fro"))
        result = grid_search(
            experiment,
            grid=None if grid_step else None,
            divergence=div,
            mode=cfg.get("mode", "exact"),
        )
        _write_surface(out_dir / "ternary_surface.csv", result)
        weights = result.best_weights
        with open(out_dir / "grid_best.json", "w") as fh:
            json.dump(
                {
                    "best_weights": list(weights.as_tuple()),
                    "best_error": result.best_error,
                },
                fh,
                indent=2,
            )

    specs = _method_specs(cfg, weights)
    tasks = [
        (experiment, spec, metric_kind) for spec in specs for metric_kind in metrics
    ]
    jobs = int(cfg.get("jobs", 1))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_loo_row, tasks))
    else:
        reports = [_loo_row(t) for t in tasks]
    _write_results_csv(out_dir / "eval.csv", experiment, reports)
    for report in reports:
        with open(out_dir / f"report_{report.method}_{report.metric}.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)

    if weights is not None:
        _dump_final_fit(out_dir, experiment, weights, cfg)
    log.info("run complete: %s", out_dir)
    return EXIT_OK


def _dump_final_fit(out_dir, experiment, weights, cfg):
    """Fit on the full pair set once and dump plans, map and solve report."""
    ctx = make_context(experiment.scenario, experiment.cost_kind, experiment.solver)
    pairs = experiment.pairs_for_rep(0)
    div = DivergenceKind(cfg.get("divergence", "fro"))
    agg = AggregationMode.PLAN_AVERAGE if cfg.get("aggregation", "plan") == "plan" else AggregationMode.MAP_AVERAGE
    tau, reports = learn_cota(ctx, pairs, weights, div, agg, cfg.get("mode", "exact"))
    base_labels = experiment.scenario.base_domain.labels()
    abs_labels = experiment.scenario.abs_domain.labels()
    export_map_csv(out_dir / "tau.csv", tau, base_labels, abs_labels)
    solve_dump = []
    for k, rep in enumerate(reports):
        solve_dump.append(
            {
                "chain": k,
                "final_objective": rep.final_objective,
                "converged": rep.converged,
                "n_outer": rep.n_outer,
                "max_marginal_violation": rep.max_marginal_violation,
                "trace_head": rep.trace[:5],
                "trace_tail": rep.trace[-5:],
            }
        )
    with open(out_dir / "solve_report.json", "w") as fh:
        json.dump(solve_dump, fh, indent=2)


def _write_results_csv(path, experiment, reports):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["scenario", "method", "divergence", "cost", "metric", "mean", "std", "ci95", "repetitions"]
        )
        for r in reports:
            div = "-"
            if r.method.startswith("cota"):
                div = r.method.split("_")[2]
            writer.writerow(
                [
                    experiment.scenario.name,
                    r.method,
                    div,
                    experiment.cost_kind,
                    r.metric,
                    repr(r.mean),
                    repr(r.std),
                    repr(r.ci_half_width),
                    r.repetitions,
                ]
            )


def _write_surface(path, result: GridResult):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kappa", "lambda", "mu", "error"])
        for w, err in result.surface:
            writer.writerow(
                [repr(w.kappa), repr(w.lam + w.lam_prime), repr(w.mu), repr(err)]
            )


# ---------------------------------------------------------------------------
# downstream
# ---------------------------------------------------------------------------


def cmd_downstream(args) -> int:
    cfg = _load_config(args)
    cfg["scenario"] = "ebm"
    out_dir = Path(cfg.get("out", "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario = _scenario_from_config(cfg)
    solver = _solver_config(cfg)
    weights = _weights(cfg) or CotaWeights.fold(0.2, 0.5, 0.3)
    ctx = make_context(scenario, cfg.get("cost", "omega"), solver)
    from .scenarios import ebm_pairs

    pairs = ebm_pairs(scenario)
    div = DivergenceKind(cfg.get("divergence", "fro"))
    tau, _ = learn_cota(ctx, pairs, weights, div, AggregationMode.PLAN_AVERAGE, cfg.get("mode", "exact"))
    table = downstream_regression(scenario, tau, seed=cfg.get("seed", 0))
    path = out_dir / "downstream_mse.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task", "mse_mean", "mse_std"])
        for task in (1, 2, 3):
            writer.writerow([task, repr(table[task]["mean"]), repr(table[task]["std"])])
    print(json.dumps({t: table[t]["mean"] for t in (1, 2, 3)}, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cota", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="validate model files")
    p_val.add_argument("models", nargs="+")
    p_val.set_defaults(func=cmd_validate)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None)
    common.add_argument("--scenario", choices=["stc_np", "stc_p", "lucas", "ebm", "identity"])
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--jobs", type=int, default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--synthetic", action="store_true")

    p_run = sub.add_parser("run", parents=[common], help="learn, evaluate, export tables")
    p_run.set_defaults(func=cmd_run)

    p_down = sub.add_parser("downstream", parents=[common], help="regression protocol")
    p_down.set_defaults(func=cmd_downstream)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MissingColumn, EmptyFile, SchemaMismatch, OSError) as exc:
        _structured_error(exc)
        return EXIT_IO
    except NoConvergence as exc:
        _structured_error(exc)
        return EXIT_CONVERGENCE
    except (ValidationError, CotaError) as exc:
        _structured_error(exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
