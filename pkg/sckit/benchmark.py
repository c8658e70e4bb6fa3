# coding: utf8
import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import srsly

from .active_labeling import IGNORE_LABEL, expand_labels, select_points
from .cloud import SpatialIndex
from .contrastive import LossConfig, separation_margin
from .errors import ConfigError, Errors, EvaluationError, Warnings, logger
from .instance_clustering import InstancePrediction
from .metrics import BoxSet, instance_map50, miou
from .parallel import run_ordered
from .scene_contexts import DEFAULT_SHELL_BOUNDARY, PartitionConfig
from .synthetic import generate_synthetic_scene, synthetic_instance_features
from .trainer import OptimizerConfig, ScenePair, train_embeddings

__all__ = [
    "MODES",
    "CANONICAL_BUDGETS",
    "BenchmarkConfig",
    "EvalReport",
    "SweepResult",
    "subset_scenes",
    "subset_boxes",
    "evaluate_semantic",
    "evaluate_instances",
    "propagate_labels",
    "la_points_replicate",
    "run_replicates",
    "sweep_partitions",
    "write_report_csv",
    "write_report_json",
    "write_sweep_csv",
]


MODES = ("LA-points", "LA-boxes", "LR", "LR-det")
CANONICAL_BUDGETS = {
    "LA-points": (20, 50, 100, 200),
    "LA-boxes": (1, 2, 4, 7),
    "LR": (1, 5, 10, 20),
    "LR-det": (10, 20, 40, 80),
}


@dataclass(frozen=True)
class BenchmarkConfig:
    """budget is points or boxes per scene for LA modes, a percentage of scenes for LR modes."""
    mode: str = "LA-points"
    budget: float = 20
    seeds: Tuple[int, ...] = (0, 1, 2)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(Errors.E065.format(value=self.mode, choices=list(MODES)))
        object.__setattr__(self, "seeds", tuple(int(seed) for seed in self.seeds))
        if not self.seeds:
            raise ConfigError(Errors.E066)
        if not self.is_canonical:
            logger.warning(Warnings.W001.format(budget=self.budget, mode=self.mode, canonical=list(CANONICAL_BUDGETS[self.mode])))

    @property
    def is_canonical(self) -> bool:
        return self.budget in CANONICAL_BUDGETS[self.mode]

    def to_dict(self) -> dict:
        return {"mode": self.mode, "budget": self.budget, "seeds": list(self.seeds)}


@dataclass(frozen=True)
class EvalReport:
    metric: str
    value: float
    per_class: Dict[int, float] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[Union[int, Tuple[int, ...]]] = None
    per_seed: Tuple[Tuple[int, float, Dict[int, float]], ...] = ()

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": list(self.seed) if isinstance(self.seed, tuple) else self.seed,
            "metric": self.metric,
            "value": self.value,
            "per_class": {str(cls): _json_float(value) for cls, value in sorted(self.per_class.items())},
        }


def _json_float(value: float) -> Optional[float]:
    return None if np.isnan(value) else float(value)


def subset_scenes(scene_ids: Sequence[Any], percentage: float, seed: int = 0) -> List[Any]:
    """Seeded sample of round(percentage / 100 * count) scenes, half rounded up, kept in input order."""
    scene_ids = list(scene_ids)
    if not scene_ids:
        raise EvaluationError(Errors.E061)
    if not 0 < percentage <= 100:
        raise ConfigError(Errors.E060.format(value=percentage))
    count = int(np.floor(percentage / 100.0 * len(scene_ids) + 0.5))
    if count >= len(scene_ids):
        return scene_ids
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(len(scene_ids), size=count, replace=False))
    return [scene_ids[i] for i in chosen]


def subset_boxes(scenes: Sequence[BoxSet], k: int, seed: int = 0) -> List[BoxSet]:
    """Per scene, a seeded sample of min(k, available) boxes."""
    if k < 1:
        raise ConfigError(Errors.E062.format(value=k))
    rng = np.random.default_rng(seed)
    subsets = []
    for boxes in scenes:
        if len(boxes) <= k:
            subsets.append(boxes)
            continue
        rows = np.sort(rng.choice(len(boxes), size=k, replace=False))
        scores = None if boxes.scores is None else boxes.scores[rows]
        subsets.append(BoxSet(boxes.boxes[rows], boxes.classes[rows], scores))
    return subsets


def evaluate_semantic(pred_labels, gt_labels, num_classes: int, config: Optional[dict] = None, seed=None) -> EvalReport:
    value, per_class = miou(pred_labels, gt_labels, num_classes)
    return EvalReport(
        "miou", value, {c: float(v) for c, v in enumerate(per_class) if not np.isnan(v)}, config or {}, seed,
    )


def evaluate_instances(pred: InstancePrediction, gt: InstancePrediction, config: Optional[dict] = None, seed=None) -> EvalReport:
    value, per_class = instance_map50(pred, gt)
    return EvalReport("map50", value, per_class, config or {}, seed)


def propagate_labels(positions: np.ndarray, labeled: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Dense prediction from sparse labels: every point takes its nearest labeled point's label."""
    _, nearest = SpatialIndex(np.asarray(positions)[labeled]).nearest(positions)
    return np.asarray(labels)[labeled][nearest]


def la_points_replicate(
    config: BenchmarkConfig,
    seed: int,
    strategy: str = "kmeans_features",
    num_objects: int = 12,
    extent: float = 3.5,
    num_classes: int = 4,
) -> EvalReport:
    """One LA-points replicate on a synthetic scene: select, expand, propagate, score mIoU."""
    scene = generate_synthetic_scene(num_objects, extent, seed=seed, num_classes=num_classes, imbalance=0.5).cloud
    features = synthetic_instance_features(scene, seed=seed)
    selection = select_points(scene, features, int(config.budget), strategy, seed)
    mask = expand_labels(scene, selection)
    labeled = np.flatnonzero(mask != IGNORE_LABEL)
    pred = propagate_labels(scene.positions, labeled, mask)
    return evaluate_semantic(pred, scene.semantic_labels, num_classes, config.to_dict(), seed)


def _replicate_job(job):
    evaluate_fn, config, seed = job
    return evaluate_fn(config, seed)


def run_replicates(
    config: BenchmarkConfig,
    evaluate_fn: Callable[[BenchmarkConfig, int], EvalReport],
    parallel_level: int = 1,
) -> EvalReport:
    """Mean of evaluate_fn over config.seeds; per-seed values are kept in the report."""
    reports = run_ordered(_replicate_job, [(evaluate_fn, config, seed) for seed in config.seeds], parallel_level)
    classes = sorted({cls for report in reports for cls in report.per_class})
    per_class = {
        cls: float(np.nanmean([report.per_class.get(cls, np.nan) for report in reports]))
        for cls in classes
    }
    return EvalReport(
        reports[0].metric,
        float(np.mean([report.value for report in reports])),
        per_class,
        config.to_dict(),
        config.seeds,
        tuple((seed, report.value, dict(report.per_class)) for seed, report in zip(config.seeds, reports)),
    )


@dataclass(frozen=True, eq=False)
class SweepResult:
    points_grid: Tuple[int, ...]
    partitions_grid: Tuple[int, ...]
    margins: np.ndarray
    final_losses: np.ndarray
    seed: int = 0

    def margin(self, num_points: int, num_partitions: int) -> float:
        return float(self.margins[self.points_grid.index(num_points), self.partitions_grid.index(num_partitions)])


def _sweep_cell(job):
    num_points, num_partitions, pairs, base, boundary, opt = job
    cfg = replace(
        base,
        partition_config=PartitionConfig.from_num_partitions(num_partitions, boundary),
        num_sampled_matches=num_points,
    )
    result = train_embeddings(pairs, cfg, opt)
    margins = [
        separation_margin(f1, f2, pair.matches, seed=opt.seed)
        for (f1, f2), pair in zip(result.features, pairs)
    ]
    logger.debug("sweep cell N=%d P=%d: margin %.4f", num_points, num_partitions, float(np.mean(margins)))
    return float(np.mean(margins)), result.final_loss


def sweep_partitions(
    points_grid: Sequence[int],
    partitions_grid: Sequence[int],
    pairs: Sequence[ScenePair],
    cfg: LossConfig,
    opt: OptimizerConfig,
    boundary: float = DEFAULT_SHELL_BOUNDARY,
    parallel_level: int = 1,
) -> SweepResult:
    """Train one embedding run per (N, P) cell and record the mean matched-vs-random margin."""
    points_grid = tuple(int(n) for n in points_grid)
    partitions_grid = tuple(int(p) for p in partitions_grid)
    if not points_grid or not partitions_grid:
        raise ConfigError(Errors.E066)
    pairs = list(pairs)
    jobs = [
        (num_points, num_partitions, pairs, cfg, boundary, opt)
        for num_points in points_grid
        for num_partitions in partitions_grid
    ]
    cells = run_ordered(_sweep_cell, jobs, parallel_level)
    shape = (len(points_grid), len(partitions_grid))
    margins = np.array([margin for margin, _ in cells]).reshape(shape)
    final_losses = np.array([loss for _, loss in cells]).reshape(shape)
    return SweepResult(points_grid, partitions_grid, margins, final_losses, opt.seed)


def write_sweep_csv(path: Union[str, Path], result: SweepResult):
    """Rows are sampled-point counts, columns partition counts."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["num_points"] + ["partitions_{}".format(p) for p in result.partitions_grid])
        for num_points, row in zip(result.points_grid, result.margins):
            writer.writerow([num_points] + [repr(float(value)) for value in row])


def write_report_csv(path: Union[str, Path], report: EvalReport):
    """One row per seed (the report itself when it has no replicates): seed,value,class_0,..."""
    rows = report.per_seed or ((report.seed, report.value, report.per_class),)
    classes = sorted({cls for _, _, per_class in rows for cls in per_class})
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["seed", "value"] + ["class_{}".format(cls) for cls in classes])
        for seed, value, per_class in rows:
            writer.writerow([seed, repr(float(value))] + [repr(float(per_class.get(cls, float("nan")))) for cls in classes])


def write_report_json(path: Union[str, Path], report: EvalReport):
    payload = report.to_dict()
    if report.per_seed:
        payload["per_seed"] = [
            {"seed": seed, "value": value, "per_class": {str(c): _json_float(v) for c, v in sorted(per_class.items())}}
            for seed, value, per_class in report.per_seed
        ]
    srsly.write_json(path, payload)
