# coding: utf8
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .errors import ConfigError, Errors
from .pair_mining import CorrespondenceSet, DEFAULT_NUM_SAMPLES
from .scene_contexts import PartitionConfig, Positions, _as_positions, partition_matrix

__all__ = [
    "FeatureMatrix",
    "LossConfig",
    "PartitionTerm",
    "LossReport",
    "MatchContext",
    "build_match_context",
    "partition_loss",
    "total_loss",
    "loss_gradient",
    "point_info_nce",
    "separation_margin",
    "DEFAULT_TEMPERATURE",
    "NORM_TOLERANCE",
]


DEFAULT_TEMPERATURE = 0.4
NORM_TOLERANCE = 1e-6
_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if not np.isfinite(values).all():
            raise ConfigError(Errors.E032)
        if self.normalized and len(values):
            norms = np.linalg.norm(values, axis=1)
            bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOLERANCE)
            if len(bad):
                raise ConfigError(Errors.E033.format(row=int(bad[0]), norm=float(norms[bad[0]])))
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, values: np.ndarray, normalize: bool = False) -> "FeatureMatrix":
        values = np.asarray(values, dtype=np.float64)
        if normalize:
            values = values / np.maximum(np.linalg.norm(values, axis=1, keepdims=True), _EPS)
        return cls(values, normalized=normalize)


Features = Union[FeatureMatrix, np.ndarray]


@dataclass(frozen=True)
class LossConfig:
    temperature: float = DEFAULT_TEMPERATURE
    partition_config: PartitionConfig = field(default_factory=PartitionConfig)
    num_sampled_matches: int = DEFAULT_NUM_SAMPLES
    normalize: bool = True

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigError(Errors.E030.format(value=self.temperature))
        if self.num_sampled_matches < 1:
            raise ConfigError(Errors.E013.format(value=self.num_sampled_matches))

    @property
    def num_partitions(self) -> int:
        return self.partition_config.num_partitions


@dataclass(frozen=True)
class PartitionTerm:
    partition: int
    loss: float
    active_anchors: int


@dataclass(frozen=True)
class LossReport:
    per_partition: Tuple[PartitionTerm, ...]
    total: float

    @property
    def values(self) -> np.ndarray:
        return np.array([term.loss for term in self.per_partition])


@dataclass(frozen=True, eq=False)
class MatchContext:
    """Matches laid out for the loss kernel.

    keys are the distinct frame-2 indices of the matches (the only admissible
    negatives); partition_of[m, c] is the partition of keys[c] around the
    anchor of match m.
    """
    anchors: np.ndarray
    positives: np.ndarray
    keys: np.ndarray
    positive_column: np.ndarray
    partition_of: np.ndarray

    def __len__(self) -> int:
        return len(self.anchors)

    def subset(self, rows: np.ndarray) -> "MatchContext":
        rows = np.asarray(rows, dtype=np.int64)
        positives = self.positives[rows]
        keys = np.unique(positives)
        columns = np.searchsorted(self.keys, keys)
        return MatchContext(
            self.anchors[rows],
            positives,
            keys,
            np.searchsorted(keys, positives),
            self.partition_of[np.ix_(rows, columns)],
        )


def build_match_context(
    matches: CorrespondenceSet,
    anchors: Positions,
    candidates: Positions,
    partition_config: PartitionConfig,
) -> MatchContext:
    """anchors/candidates are the frame-1/frame-2 positions in a shared (world) frame."""
    anchor_rows = matches.anchors
    positives = matches.positives
    keys = np.unique(positives)
    partition_of = partition_matrix(
        partition_config,
        _as_positions(anchors)[anchor_rows],
        _as_positions(candidates)[keys],
    )
    return MatchContext(anchor_rows, positives, keys, np.searchsorted(keys, positives), partition_of)


def _values(features: Features) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        return features.values
    values = np.asarray(features, dtype=np.float64)
    if not np.isfinite(values).all():
        raise ConfigError(Errors.E032)
    return values


def _check_rows(values: np.ndarray, indices: np.ndarray):
    if len(indices) and indices.max() >= len(values):
        raise ConfigError(Errors.E031.format(rows=len(values), index=int(indices.max())))


def _normalize_rows(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.maximum(np.linalg.norm(values, axis=1, keepdims=True), _EPS)
    return values / norms, norms


def _kernel(
    f1: np.ndarray,
    f2: np.ndarray,
    context: MatchContext,
    temperature: float,
    num_partitions: int,
    with_grad: bool,
):
    """Per-partition mean PointInfoNCE terms and, optionally, d(total)/d(logits).

    Every term is -a_pos + logsumexp({a_pos} U negatives in the partition), shifted
    by the per-(match, partition) maximum; terms without negatives are exactly 0.
    """
    n = len(context)
    anchors = f1[context.anchors]
    keys = f2[context.keys]
    logits = (anchors @ keys.T) / temperature
    rows = np.arange(n)
    positive = logits[rows, context.positive_column]
    negative = np.ones(logits.shape, dtype=bool)
    negative[rows, context.positive_column] = False

    losses = np.zeros(num_partitions)
    active = np.zeros(num_partitions, dtype=np.int64)
    grad = np.zeros(logits.shape) if with_grad else None
    positive_grad = np.zeros(n) if with_grad else None
    for p in range(num_partitions):
        mask = negative & (context.partition_of == p)
        has_negative = mask.any(axis=1)
        active[p] = int(has_negative.sum())
        if not active[p]:
            continue
        shift = np.maximum(positive, np.where(mask, logits, -np.inf).max(axis=1))
        neg_rows, neg_cols = np.nonzero(mask)
        neg_exp = np.exp(logits[neg_rows, neg_cols] - shift[neg_rows])
        pos_exp = np.exp(positive - shift)
        denominator = pos_exp + np.bincount(neg_rows, weights=neg_exp, minlength=n)
        terms = np.where(has_negative, np.log(denominator) - (positive - shift), 0.0)
        losses[p] = terms.sum() / n
        if with_grad:
            grad[neg_rows, neg_cols] += neg_exp / denominator[neg_rows]
            positive_grad += np.where(has_negative, pos_exp / denominator - 1.0, 0.0)
    if with_grad:
        grad[rows, context.positive_column] += positive_grad
        grad /= num_partitions * n
    return losses, active, grad


def _evaluate(f1: Features, f2: Features, context: MatchContext, cfg: LossConfig, with_grad: bool):
    values1 = _values(f1)
    values2 = _values(f2)
    _check_rows(values1, context.anchors)
    _check_rows(values2, context.keys)
    if cfg.normalize:
        values1, norms1 = _normalize_rows(values1)
        values2, norms2 = _normalize_rows(values2)
    losses, active, grad = _kernel(values1, values2, context, cfg.temperature, cfg.num_partitions, with_grad)
    if not with_grad:
        return losses, active, None, None

    grad1 = np.zeros_like(values1)
    grad2 = np.zeros_like(values2)
    np.add.at(grad1, context.anchors, grad @ values2[context.keys] / cfg.temperature)
    grad2[context.keys] = grad.T @ values1[context.anchors] / cfg.temperature
    if cfg.normalize:
        grad1 = (grad1 - values1 * np.sum(values1 * grad1, axis=1, keepdims=True)) / norms1
        grad2 = (grad2 - values2 * np.sum(values2 * grad2, axis=1, keepdims=True)) / norms2
    return losses, active, grad1, grad2


def _context(matches, anchors, candidates, cfg: LossConfig) -> MatchContext:
    if isinstance(matches, MatchContext):
        return matches
    return build_match_context(matches, anchors, candidates, cfg.partition_config)


def _report(losses: np.ndarray, active: np.ndarray) -> LossReport:
    terms = tuple(PartitionTerm(p, float(losses[p]), int(active[p])) for p in range(len(losses)))
    return LossReport(terms, float(losses.sum() / len(losses)))


def partition_loss(
    f1: Features,
    f2: Features,
    matches: Union[CorrespondenceSet, MatchContext],
    anchors: Optional[Positions],
    candidates: Optional[Positions],
    partition: int,
    cfg: LossConfig,
) -> float:
    """L_p: mean over matches of the InfoNCE term restricted to negatives in partition p."""
    if not len(matches):
        return 0.0
    losses, _, _, _ = _evaluate(f1, f2, _context(matches, anchors, candidates, cfg), cfg, with_grad=False)
    return float(losses[partition])


def total_loss(
    f1: Features,
    f2: Features,
    matches: Union[CorrespondenceSet, MatchContext],
    anchors: Optional[Positions],
    candidates: Optional[Positions],
    cfg: LossConfig,
) -> LossReport:
    if not len(matches):
        return _report(np.zeros(cfg.num_partitions), np.zeros(cfg.num_partitions, dtype=np.int64))
    losses, active, _, _ = _evaluate(f1, f2, _context(matches, anchors, candidates, cfg), cfg, with_grad=False)
    return _report(losses, active)


def loss_gradient(
    f1: Features,
    f2: Features,
    matches: Union[CorrespondenceSet, MatchContext],
    anchors: Optional[Positions],
    candidates: Optional[Positions],
    cfg: LossConfig,
    return_report: bool = False,
):
    """Analytic gradient of total_loss with respect to every row of f1 and f2."""
    values1 = _values(f1)
    values2 = _values(f2)
    if not len(matches):
        grads = (np.zeros_like(values1), np.zeros_like(values2))
        report = _report(np.zeros(cfg.num_partitions), np.zeros(cfg.num_partitions, dtype=np.int64))
        return grads + (report,) if return_report else grads
    losses, active, grad1, grad2 = _evaluate(
        values1, values2, _context(matches, anchors, candidates, cfg), cfg, with_grad=True,
    )
    if return_report:
        return grad1, grad2, _report(losses, active)
    return grad1, grad2


def point_info_nce(
    f1: Features,
    f2: Features,
    matches: CorrespondenceSet,
    temperature: float = DEFAULT_TEMPERATURE,
    normalize: bool = True,
) -> float:
    """Unpartitioned PointInfoNCE: every other matched key is a negative."""
    if not temperature > 0:
        raise ConfigError(Errors.E030.format(value=temperature))
    if not len(matches):
        return 0.0
    keys = np.unique(matches.positives)
    context = MatchContext(
        matches.anchors,
        matches.positives,
        keys,
        np.searchsorted(keys, matches.positives),
        np.zeros((len(matches), len(keys)), dtype=np.int16),
    )
    cfg = LossConfig(temperature, PartitionConfig(1, 1, ()), max(1, len(matches)), normalize)
    losses, _, _, _ = _evaluate(f1, f2, context, cfg, with_grad=False)
    return float(losses[0])


def separation_margin(f1: Features, f2: Features, matches: CorrespondenceSet, seed: int = 0) -> float:
    """Mean cosine of matched pairs minus mean cosine of as many random non-matched pairs."""
    if not len(matches):
        return 0.0
    values1, _ = _normalize_rows(_values(f1))
    values2, _ = _normalize_rows(_values(f2))
    matched = np.sum(values1[matches.anchors] * values2[matches.positives], axis=1).mean()
    matched_codes = set((matches.anchors * len(values2) + matches.positives).tolist())
    if len(matched_codes) >= len(values1) * len(values2):
        return 0.0
    rng = np.random.default_rng(seed)
    wanted = len(matches)
    rows, cols = [], []
    while len(rows) < wanted:
        i = rng.integers(0, len(values1), size=wanted)
        j = rng.integers(0, len(values2), size=wanted)
        keep = [k for k in range(wanted) if int(i[k]) * len(values2) + int(j[k]) not in matched_codes]
        rows.extend(i[keep].tolist())
        cols.extend(j[keep].tolist())
    rows = np.asarray(rows[:wanted])
    cols = np.asarray(cols[:wanted])
    random = np.sum(values1[rows] * values2[cols], axis=1).mean()
    return float(matched - random)
