# coding: utf8
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Hashable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .cloud import PointCloud, Pose
from .contrastive import FeatureMatrix, LossConfig, MatchContext, build_match_context, loss_gradient
from .errors import ConfigError, DivergenceError, Errors, logger
from .pair_mining import CorrespondenceSet, sample_indices

__all__ = [
    "OptimizerConfig",
    "ScenePair",
    "TrainingResult",
    "learning_rate",
    "train_embeddings",
    "write_loss_curve",
]


# partition matrices up to this many entries are built once per pair and sliced per step
_PRECOMPUTE_LIMIT = 4_000_000


@dataclass(frozen=True)
class OptimizerConfig:
    """SGD settings; the defaults are the backbone recipe (lr 0.1, x0.99 every 1000 steps, batch 32).

    The per-pair loss is a mean over sampled matches, so one embedding row moves by
    roughly lr / (N * temperature) per step. At lr 0.1 a free embedding table barely
    moves in 2000 steps; the sweep configs (config/sck_sweep_small.cfg,
    config/sck_acceptance.cfg) train at lr 10.
    """
    lr: float = 0.1
    lr_decay: float = 0.99
    decay_every_steps: int = 1000
    steps: int = 2000
    seed: int = 0
    dim: int = 16
    batch_size: int = 32

    def __post_init__(self):
        if self.dim < 2:
            raise ConfigError(Errors.E036.format(value=self.dim))
        for name, ok in (
            ("lr", self.lr > 0),
            ("lr_decay", 0 < self.lr_decay <= 1),
            ("steps", self.steps >= 1),
            ("decay_every_steps", self.decay_every_steps >= 1),
            ("batch_size", self.batch_size >= 1),
        ):
            if not ok:
                raise ConfigError(Errors.E037.format(name=name, value=getattr(self, name)))


@dataclass(frozen=True, eq=False)
class ScenePair:
    cloud_a: PointCloud
    cloud_b: PointCloud
    matches: CorrespondenceSet
    pose_a: Pose = field(default_factory=Pose.identity)
    pose_b: Pose = field(default_factory=Pose.identity)
    pair_id: Hashable = None

    @property
    def world_a(self) -> np.ndarray:
        return self.pose_a.apply(self.cloud_a.positions)

    @property
    def world_b(self) -> np.ndarray:
        return self.pose_b.apply(self.cloud_b.positions)


@dataclass(frozen=True, eq=False)
class TrainingResult:
    features: List[Tuple[FeatureMatrix, FeatureMatrix]]
    loss_curve: np.ndarray
    partition_curves: np.ndarray

    @property
    def initial_loss(self) -> float:
        return float(self.loss_curve[0])

    @property
    def final_loss(self) -> float:
        return float(self.loss_curve[-1])


def learning_rate(opt: OptimizerConfig, step: int) -> float:
    return opt.lr * opt.lr_decay ** (step // opt.decay_every_steps)


def _init_table(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    table = rng.standard_normal((rows, dim))
    return table / np.maximum(np.linalg.norm(table, axis=1, keepdims=True), 1e-12)


class _PairState:

    def __init__(self, pair: ScenePair, cfg: LossConfig, f1: np.ndarray, f2: np.ndarray):
        self.pair = pair
        self.cfg = cfg
        self.f1 = f1
        self.f2 = f2
        self._context: Optional[MatchContext] = None
        keys = len(np.unique(pair.matches.positives)) if len(pair.matches) else 0
        if len(pair.matches) * keys <= _PRECOMPUTE_LIMIT:
            self._context = build_match_context(pair.matches, pair.world_a, pair.world_b, cfg.partition_config)
        else:
            self._world_a = pair.world_a
            self._world_b = pair.world_b

    def sampled_context(self, seed: int) -> MatchContext:
        rows = sample_indices(len(self.pair.matches), self.cfg.num_sampled_matches, seed)
        if self._context is not None:
            return self._context if len(rows) == len(self._context) else self._context.subset(rows)
        sampled = CorrespondenceSet(self.pair.matches.pairs[rows], self.pair.matches.match_radius)
        return build_match_context(sampled, self._world_a, self._world_b, self.cfg.partition_config)


def train_embeddings(
    pairs: Sequence[ScenePair],
    cfg: LossConfig,
    opt: OptimizerConfig,
    callback: Optional[Callable[[int, float], None]] = None,
) -> TrainingResult:
    """Projected SGD on free per-point embedding tables, one table per pair side.

    Each step draws up to opt.batch_size pairs and a fresh sample of
    cfg.num_sampled_matches matches per pair; the step objective is the sum of
    the per-pair losses and the recorded curve value is their mean.
    """
    if not pairs:
        raise ConfigError(Errors.E035)
    rng = np.random.default_rng(opt.seed)
    states = []
    for pair in pairs:
        f1 = _init_table(rng, len(pair.cloud_a), opt.dim)
        f2 = _init_table(rng, len(pair.cloud_b), opt.dim)
        states.append(_PairState(pair, cfg, f1, f2))

    num_partitions = cfg.num_partitions
    loss_curve = np.zeros(opt.steps)
    partition_curves = np.zeros((opt.steps, num_partitions))
    last_finite = float("nan")
    for step in range(opt.steps):
        lr = learning_rate(opt, step)
        if len(states) > opt.batch_size:
            batch = np.sort(rng.choice(len(states), size=opt.batch_size, replace=False))
        else:
            batch = np.arange(len(states))
        seeds = rng.integers(0, 2 ** 31, size=len(batch))
        totals = np.zeros(len(batch))
        per_partition = np.zeros((len(batch), num_partitions))
        for b, (index, seed) in enumerate(zip(batch, seeds)):
            state = states[index]
            grad1, grad2, report = loss_gradient(
                state.f1, state.f2, state.sampled_context(int(seed)), None, None, cfg, return_report=True,
            )
            if not np.isfinite(report.total) or not (np.isfinite(grad1).all() and np.isfinite(grad2).all()):
                raise DivergenceError(Errors.E034.format(step=step, lr=lr, last=last_finite))
            totals[b] = report.total
            per_partition[b] = report.values
            state.f1 = _renormalize(state.f1 - lr * grad1, cfg.normalize)
            state.f2 = _renormalize(state.f2 - lr * grad2, cfg.normalize)
        loss_curve[step] = totals.mean()
        partition_curves[step] = per_partition.mean(axis=0)
        last_finite = float(loss_curve[step])
        if callback is not None:
            callback(step, last_finite)
        if step % 100 == 0:
            logger.debug("step %d: lr=%g loss=%.6f", step, lr, last_finite)

    features = [
        (FeatureMatrix(_renormalize(state.f1, True), normalized=True), FeatureMatrix(_renormalize(state.f2, True), normalized=True))
        for state in states
    ]
    return TrainingResult(features, loss_curve, partition_curves)


def _renormalize(table: np.ndarray, normalize: bool) -> np.ndarray:
    if not normalize:
        return table
    return table / np.maximum(np.linalg.norm(table, axis=1, keepdims=True), 1e-12)


def write_loss_curve(path: Union[str, Path], result: TrainingResult):
    """CSV with columns step,total_loss,per_partition_0,..."""
    num_partitions = result.partition_curves.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "total_loss"] + ["per_partition_{}".format(p) for p in range(num_partitions)])
        for step, (total, values) in enumerate(zip(result.loss_curve, result.partition_curves)):
            writer.writerow([step, repr(float(total))] + [repr(float(v)) for v in values])
