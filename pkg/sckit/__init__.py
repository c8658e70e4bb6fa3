from .errors import *
from .cloud import *
from .parallel import *
from .pair_mining import *
from .scene_contexts import *
from .contrastive import *
from .trainer import *
from .active_labeling import *
from .instance_clustering import *
from .metrics import *
from .synthetic import *
from .benchmark import *
from .config import *
from .io import *


__version__ = "0.1.0"

__all__ = [
    # from cloud
    "PointCloud", "Pose", "SpatialIndex", "voxel_downsample", "transform", "inverse", "compose", "build_index",
    # from pair_mining
    "FramePair", "CorrespondenceSet", "MiningConfig",
    "subsample_frames", "compute_overlap", "prepare_frames", "mine_pairs", "sample_matches", "sample_indices",
    # from scene_contexts
    "PartitionConfig", "PartitionAssignment",
    "relative_distance", "relative_angle", "relative_distance_matrix", "relative_angle_matrix",
    "partition_index", "partition_matrix", "assign_partitions",
    # from contrastive
    "FeatureMatrix", "LossConfig", "PartitionTerm", "LossReport", "MatchContext", "build_match_context",
    "partition_loss", "total_loss", "loss_gradient", "point_info_nce", "separation_margin",
    # from trainer
    "OptimizerConfig", "ScenePair", "TrainingResult", "learning_rate", "train_embeddings", "write_loss_curve",
    # from active_labeling
    "LabelBudget", "SelectionResult", "SelectConfig", "STRATEGIES", "IGNORE_LABEL",
    "lloyd_iterations", "kmeans", "select_points", "object_coverage", "expand_labels", "backproject_features",
    "clutter_density", "is_cluttered",
    # from instance_clustering
    "ClusterConfig", "InstancePrediction", "UNASSIGNED",
    "shift_points", "bfs_cluster", "score_instances", "decode_instances",
    # from metrics
    "BoxSet", "miou", "average_precision", "instance_iou", "instance_map50", "box_iou", "box_map",
    # from synthetic
    "SyntheticScene", "generate_synthetic_scene", "make_synthetic_dataset", "synthetic_instance_features",
    # from benchmark
    "BenchmarkConfig", "EvalReport", "SweepResult", "subset_scenes", "subset_boxes",
    "evaluate_semantic", "evaluate_instances", "run_replicates", "sweep_partitions",
    # from config
    "load_config", "setup_logging",
    # from io
    "read_ply", "write_ply", "read_pose", "write_pose", "read_features", "write_features",
    "read_correspondences", "write_correspondences",
    # from errors
    "SckError", "ConfigError", "FormatError", "GeometryError", "DivergenceError", "EvaluationError",
]
