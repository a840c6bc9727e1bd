# scamfqi/services/harness.py - sweep (d, mode, seed) cells and aggregate learning curves
import json
import logging
import os
from collections import defaultdict
from typing import Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import stats

from scamfqi.core.errors import ArgumentError, ScamFqiError, StageError
from scamfqi.core.rng import derive_seed
from scamfqi.database.checkpoints import TRAINING_LOG, save_checkpoint, write_training_log
from scamfqi.database.datasets import save_datasets
from scamfqi.learning.fqi import evaluate, schema_for_dataset, train
from scamfqi.models.plant import ProductionPlant, load_scenario
from scamfqi.models.sharing import distance_graph
from scamfqi.models.tabular_game import TabularGame, load_distribution, uniform_distribution
from scamfqi.oracle.bounds import oracle_report
from scamfqi.schemas.experiment import CurvePoint, ExperimentConfig
from scamfqi.schemas.graph import ObservationMode
from scamfqi.schemas.reports import BoundReport
from scamfqi.schemas.training import TrainConfig
from scamfqi.services.collector import collect, uniform_policies
from scamfqi.services.svg import render_curves

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["d", "mode", "seed", "iteration", "makespan", "return"]
CURVE_COLUMNS = ["d", "mode", "iteration", "mean_makespan", "ci_low", "ci_high", "mean_return", "seeds", "seed_values"]
MODE_ORDER = {ObservationMode.FULL.value: 0, ObservationMode.COMPRESSED.value: 1}
EVAL_LABEL = 1


def bootstrap_ci(samples: Sequence[float], level: float = 0.95, resamples: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval of the mean."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ArgumentError("bootstrap_ci needs at least one sample")
    if not 0.0 < level < 1.0:
        raise ArgumentError(f"level must lie in (0, 1), got {level}")
    mean = float(x.mean())
    if x.size == 1 or np.all(x == x[0]):
        return float(x[0]), float(x[0])
    res = stats.bootstrap(
        (x,),
        np.mean,
        confidence_level=level,
        n_resamples=resamples,
        method="percentile",
        rng=np.random.default_rng(seed),
    )
    low, high = float(res.confidence_interval.low), float(res.confidence_interval.high)
    return min(low, mean), max(high, mean)


def build_env(config: ExperimentConfig) -> ProductionPlant:
    scenario = load_scenario(config.scenario)
    if config.horizon is not None:
        scenario = scenario.model_copy(update={"horizon": config.horizon})
    return ProductionPlant(scenario, gamma=config.gamma)


def train_config_for(config: ExperimentConfig, env: ProductionPlant, seed: int, K: int | None = None) -> TrainConfig:
    return TrainConfig(
        K=K or config.K,
        gamma=config.gamma,
        epsilon_greedy=config.epsilon,
        trees=config.trees.model_copy(update={"seed": derive_seed(config.trees.seed, seed)}),
        # a finished plant keeps paying the constant shift forever
        terminal_value=env.reward_shift / (1.0 - config.gamma),
    )


def cell_dir(out_dir: str, d: int, mode: ObservationMode, seed: int) -> str:
    return os.path.join(out_dir, "cells", f"d{d}_{ObservationMode(mode).value}_s{seed}")


def run_cell(config: ExperimentConfig, d: int, mode: ObservationMode, seed: int, out_dir: str) -> dict:
    """collect -> train -> evaluate at every k; returns raw rows plus metadata."""
    provenance = {"d": d, "mode": ObservationMode(mode).value, "seed": seed}
    logger.info("cell d=%d mode=%s seed=%d", d, provenance["mode"], seed)
    try:
        env = build_env(config)
        graph = distance_graph(env.layout, d)
        datasets = collect(env, graph, mode, None, config.episodes_collect, env.horizon, seed)
        path = cell_dir(out_dir, d, mode, seed)
        if config.save_datasets:
            save_datasets(datasets, os.path.join(path, "data"), graph)
        result = train(env, datasets, train_config_for(config, env, seed))
        os.makedirs(path, exist_ok=True)
        write_training_log(os.path.join(path, TRAINING_LOG), result.log)
        eval_seed = derive_seed(seed, EVAL_LABEL)
        rows, greedy_rows = [], []
        for k in range(config.K + 1):
            if config.save_checkpoints:
                save_checkpoint(path, k, [q for q, _ in result.iterations[k]])
            policies = uniform_policies(env) if k == 0 else result.policies(k)
            for eps, target in ((None, rows), (0.0, greedy_rows)):
                ev = evaluate(env, policies, graph, mode, config.episodes_eval, eval_seed, epsilon_override=eps)
                target.append({**provenance, "iteration": k, "makespan": ev["mean_makespan"], "return": ev["mean_return"]})
        widths = [schema_for_dataset(env, ds).width for ds in datasets]
        meta = {**provenance, "observation_widths": widths, "mean_width": float(np.mean(widths)),
                "records_per_agent": len(datasets[0].records), "reward_shift": env.reward_shift}
        return {"rows": rows, "greedy_rows": greedy_rows, "meta": meta, "error": None}
    except ScamFqiError as e:
        logger.error("cell %s failed: %s", provenance, e.detail)
        return {"rows": [], "greedy_rows": [], "meta": provenance, "error": e.detail}
    except Exception as e:
        logger.exception("cell %s failed", provenance)
        return {"rows": [], "greedy_rows": [], "meta": provenance, "error": str(e)}


def results_frame(rows: Sequence[dict]) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows), columns=RESULT_COLUMNS)
    if frame.empty:
        return frame
    frame["_mode_order"] = frame["mode"].map(MODE_ORDER)
    frame = frame.sort_values(["d", "_mode_order", "seed", "iteration"], kind="mergesort")
    return frame.drop(columns="_mode_order").reset_index(drop=True)


def aggregate(frame: pd.DataFrame, level: float = 0.95, resamples: int = 10_000) -> list[CurvePoint]:
    """Per (d, mode, k) mean over seeds; a pure function of results.csv."""
    groups = defaultdict(list)
    for row in frame.to_dict("records"):
        groups[(int(row["d"]), str(row["mode"]), int(row["iteration"]))].append(row)
    points = []
    for d, mode, k in sorted(groups, key=lambda g: (g[0], MODE_ORDER.get(g[1], 9), g[2])):
        rows = sorted(groups[(d, mode, k)], key=lambda r: r["seed"])
        values = [float(r["makespan"]) for r in rows]
        low, high = bootstrap_ci(values, level, resamples, seed=derive_seed(d, MODE_ORDER.get(mode, 9), k))
        points.append(
            CurvePoint(
                d=d,
                mode=ObservationMode(mode),
                iteration=k,
                mean_makespan=float(np.mean(values)),
                ci_low=low,
                ci_high=high,
                mean_return=float(np.mean([float(r["return"]) for r in rows])),
                seeds=[int(r["seed"]) for r in rows],
                seed_values=values,
            )
        )
    return points


def trends(points: Sequence[CurvePoint]) -> dict:
    """Qualitative checks on the curves; reported, never asserted."""
    curves: dict[tuple, list[CurvePoint]] = defaultdict(list)
    for p in points:
        curves[(p.d, p.mode.value)].append(p)
    for pts in curves.values():
        pts.sort(key=lambda p: p.iteration)

    per_curve = {}
    for (d, mode), pts in sorted(curves.items(), key=lambda kv: (kv[0][0], MODE_ORDER[kv[0][1]])):
        per_curve[f"d={d},{mode}"] = {
            "initial_makespan": pts[0].mean_makespan,
            "final_makespan": pts[-1].mean_makespan,
            "best_makespan": min(p.mean_makespan for p in pts),
            "makespan_decreases": pts[-1].mean_makespan < pts[0].mean_makespan,
        }

    intermediate = {}
    for mode in sorted({m for _, m in curves}, key=MODE_ORDER.get):
        ds = sorted(d for d, m in curves if m == mode)
        inner = [d for d in ds if 1 < d < ds[-1]]
        if 1 in ds and inner:
            final = {d: curves[(d, mode)][-1].mean_makespan for d in ds}
            intermediate[mode] = any(final[d] < final[1] for d in inner)

    compressed_early = {}
    for d in sorted({d for d, _ in curves}):
        full, comp = curves.get((d, "full")), curves.get((d, "compressed"))
        if full and comp:
            early = max(1, len(full) // 3)
            compressed_early[f"d={d}"] = (
                np.mean([p.mean_makespan for p in comp[1:early + 1]])
                <= np.mean([p.mean_makespan for p in full[1:early + 1]])
            )
    return {
        "curves": per_curve,
        "intermediate_d_beats_self_only": intermediate,
        "compressed_at_least_as_fast_early": {k: bool(v) for k, v in compressed_early.items()},
    }


def write_curves(points: Sequence[CurvePoint], out_dir: str) -> None:
    records = [
        {
            "d": p.d,
            "mode": p.mode.value,
            "iteration": p.iteration,
            "mean_makespan": p.mean_makespan,
            "ci_low": p.ci_low,
            "ci_high": p.ci_high,
            "mean_return": p.mean_return,
            "seeds": ";".join(str(s) for s in p.seeds),
            "seed_values": ";".join(repr(v) for v in p.seed_values),
        }
        for p in points
    ]
    pd.DataFrame(records, columns=CURVE_COLUMNS).to_csv(os.path.join(out_dir, "curves.csv"), index=False)
    with open(os.path.join(out_dir, "curves.svg"), "w") as f:
        f.write('<?xml version="1.0" encoding="UTF-8"?>\n')
        f.write(render_curves(points))
        f.write("\n")
    with open(os.path.join(out_dir, "trends.json"), "w") as f:
        json.dump(trends(points), f, indent=2)


def emit(
    rows: Sequence[dict],
    out_dir: str,
    greedy_rows: Sequence[dict] = (),
    bound_report: BoundReport | None = None,
    level: float = 0.95,
    resamples: int = 10_000,
) -> list[CurvePoint]:
    if not rows:
        raise ArgumentError("no results to emit")
    os.makedirs(out_dir, exist_ok=True)
    frame = results_frame(rows)
    frame.to_csv(os.path.join(out_dir, "results.csv"), index=False)
    if greedy_rows:
        results_frame(greedy_rows).to_csv(os.path.join(out_dir, "results_greedy.csv"), index=False)
    points = aggregate(frame, level, resamples)
    write_curves(points, out_dir)
    if bound_report is not None:
        write_bound_report(bound_report, out_dir)
    return points


def write_bound_report(bound_report: BoundReport, out_dir: str) -> None:
    with open(os.path.join(out_dir, "boundreport.json"), "w") as f:
        f.write(bound_report.model_dump_json(indent=2))


def report(out_dir: str, level: float = 0.95, resamples: int = 10_000) -> list[CurvePoint]:
    """Rebuild curves.csv, curves.svg and trends.json from results.csv alone."""
    path = os.path.join(out_dir, "results.csv")
    if not os.path.exists(path):
        raise ArgumentError(f"{path} does not exist")
    frame = pd.read_csv(path, float_precision="round_trip")
    if frame.empty:
        raise ArgumentError(f"{path} holds no results")
    points = aggregate(frame, level, resamples)
    write_curves(points, out_dir)
    return points


def tabular_study(config: ExperimentConfig) -> BoundReport:
    study = config.tabular
    game = TabularGame.from_file(study.game)
    nu = load_distribution(study.distribution, game) if study.distribution else uniform_distribution(game)
    req = study.request
    hoods = req.neighborhoods or [[i] for i in range(game.agent_count)]
    return oracle_report(game, nu, hoods, req.iterations, req.delta, req.function_class_size, req.dataset_size, req.tol)


def run(config: ExperimentConfig, out_dir: str) -> list[CurvePoint]:
    cells = [(d, ObservationMode(mode), seed) for d in config.d_values for mode in config.modes for seed in config.seeds]
    logger.info("running %d cells into %s", len(cells), out_dir)
    os.makedirs(out_dir, exist_ok=True)
    if config.n_jobs == 1:
        outputs = [run_cell(config, d, mode, seed, out_dir) for d, mode, seed in cells]
    else:
        outputs = Parallel(n_jobs=config.n_jobs)(delayed(run_cell)(config, d, mode, seed, out_dir) for d, mode, seed in cells)

    rows = [r for out in outputs for r in out["rows"]]
    greedy_rows = [r for out in outputs for r in out["greedy_rows"]]
    with open(os.path.join(out_dir, "cells.json"), "w") as f:
        json.dump([{**out["meta"], "error": out["error"]} for out in outputs], f, indent=2)

    failed = [out for out in outputs if out["error"]]
    points = emit(rows, out_dir, greedy_rows, None, config.ci_level, config.bootstrap_resamples) if rows else []

    # the curves are already on disk when the oracle study fails
    study_error = None
    if config.tabular is not None:
        try:
            write_bound_report(tabular_study(config), out_dir)
        except ScamFqiError as e:
            logger.warning("tabular study failed: %s", e.detail)
            study_error = StageError("tabular study", {"game": config.tabular.game}, e.detail)

    if failed:
        first = failed[0]
        raise StageError("run", first["meta"], f"{len(failed)} of {len(cells)} cells failed; first: {first['error']}")
    if study_error is not None:
        raise study_error
    return points
