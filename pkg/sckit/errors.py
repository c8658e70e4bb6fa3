# coding: utf8
import logging

__all__ = [
    "Errors",
    "Warnings",
    "SckError",
    "ConfigError",
    "FormatError",
    "GeometryError",
    "DivergenceError",
    "EvaluationError",
    "logger",
]


logger = logging.getLogger("sckit")


class Warnings:
    W001 = "W001: budget {budget} is not one of the canonical {mode} values {canonical}; running ad-hoc"
    W002 = "W002: budget {budget} exceeds scene size {size}; every point is selected"
    W003 = "W003: frame pair ({a}, {b}) has an empty frame after downsampling; skipped"
    W004 = "W004: k-means cluster {cluster} emptied at iteration {iteration}; re-seeded with point {index}"


class Errors:
    E001 = "E001: voxel_size must be positive, got {value}"
    E002 = "E002: rotation is not orthonormal with determinant +1 (tolerance {tol})"
    E003 = "E003: positions contain NaN or Inf components"
    E004 = "E004: per-point array '{name}' has length {length}, expected {expected}"
    E005 = "E005: positions must be an (N, 3) array, got shape {shape}"
    E010 = "E010: stride must be >= 1, got {value}"
    E011 = "E011: radius must be positive, got {value}"
    E012 = "E012: min_overlap must lie in [0, 1], got {value}"
    E013 = "E013: sample size must be >= 1, got {value}"
    E014 = "E014: compute_overlap needs two non-empty clouds"
    E020 = "E020: partition config needs positive sector and shell counts, got {sectors} x {shells}"
    E021 = "E021: shell_boundaries must hold {expected} strictly increasing positive values, got {value}"
    E022 = "E022: cannot derive a default partition layout for P={value}"
    E023 = "E023: anchor_index {index} out of range for {size} anchors"
    E030 = "E030: temperature must be positive, got {value}"
    E031 = "E031: feature matrix has {rows} rows but matches reference row {index}"
    E032 = "E032: feature matrix contains NaN or Inf entries"
    E033 = "E033: feature rows are flagged normalized but row {row} has norm {norm}"
    E034 = "E034: loss diverged at step {step} (lr={lr}, last finite loss={last})"
    E035 = "E035: training needs at least one scene pair"
    E036 = "E036: embedding dimension must be >= 2, got {value}"
    E037 = "E037: invalid optimizer setting {name}={value}"
    E040 = "E040: k must satisfy 1 <= k <= {rows}, got {value}"
    E041 = "E041: unknown selection strategy '{value}'; expected one of {choices}"
    E042 = "E042: strategy kmeans_features needs a feature matrix with {rows} rows"
    E043 = "E043: strategy kmeans_raw needs colors on the scene"
    E044 = "E044: scene has no instance labels"
    E045 = "E045: scene has no semantic labels to expand"
    E050 = "E050: offsets have {length} rows but the cloud has {expected} points"
    E051 = "E051: semantic scores have {rows} rows but the prediction covers {expected} points"
    E060 = "E060: percentage must satisfy 0 < percentage <= 100, got {value}"
    E061 = "E061: cannot subset an empty scene list"
    E062 = "E062: k must be >= 1, got {value}"
    E063 = "E063: no valid (non-ignored) points to evaluate"
    E064 = "E064: prediction and ground truth lengths differ ({pred} vs {gt})"
    E065 = "E065: unknown benchmark mode '{value}'; expected one of {choices}"
    E066 = "E066: sweep grids must be non-empty"
    E067 = "E067: predictions carry no confidences; run score_instances first"
    E068 = "E068: {count} ground-truth labels fall outside [0, {num_classes}) and are not the ignore label {ignore}, e.g. {example}"
    E070 = "E070: object count must be >= 1, got {value}"
    E071 = "E071: degenerate extent {value}; cannot place {count} objects"
    E080 = "E080: bad magic in {path}: expected {expected!r}, got {found!r}"
    E081 = "E081: truncated payload in {path}: expected {expected} bytes, got {found}"
    E082 = "E082: PLY file {path} has no vertex element with x/y/z"
    E083 = "E083: pose file {path} must hold 16 numbers with last row 0 0 0 1"
    E084 = "E084: malformed line {line_no} in {path}: {line!r}"
    E085 = "E085: {path} carries no per-point {field} property"
    E090 = "E090: unknown config section or key '{value}'"


class SckError(Exception):
    pass


class ConfigError(SckError, ValueError):
    pass


class FormatError(SckError, ValueError):
    pass


class GeometryError(SckError, ValueError):
    pass


class EvaluationError(SckError, ValueError):
    pass


class DivergenceError(SckError, ArithmeticError):
    pass
