# coding: utf8
from pathlib import Path
import sys
from typing import List, Optional

import numpy as np
import plac
import srsly

from .active_labeling import IGNORE_LABEL, expand_labels, select_points
from .benchmark import evaluate_instances, evaluate_semantic, sweep_partitions, write_report_csv, write_report_json, write_sweep_csv
from .config import (
    cluster_config, load_config, loss_config, mining_config, optimizer_config, partition_config, select_config, setup_logging,
)
from .errors import Errors, EvaluationError
from .instance_clustering import InstancePrediction, decode_instances
from .io import (
    read_correspondences, read_features, read_frames, read_labels, read_offsets, read_pairs_index, read_ply, read_prediction,
    write_correspondences, write_features, write_frame, write_mask, write_offsets, write_pairs_index, write_ply,
    write_prediction, write_selection,
)
from .pair_mining import mine_pairs, prepare_frames, subsample_frames
from .parallel import resolve_parallel_level
from .scene_contexts import assign_partitions
from .synthetic import generate_synthetic_scene, make_synthetic_dataset, one_hot_scores
from .trainer import ScenePair, train_embeddings, write_loss_curve

PAIR_SEPARATOR = "__"
PAIRS_INDEX = "pairs.json"


def _int_list(value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    return [int(v) for v in str(value).split(",") if v.strip()]


def _float_list(value: Optional[str]) -> Optional[List[float]]:
    if value is None:
        return None
    return [float(v) for v in str(value).split(",") if v.strip()]


def _partition_overrides(sectors, shells, boundary) -> dict:
    overrides = {
        "partition.angular_sectors": sectors,
        "partition.radial_shells": shells,
        "partition.shell_boundaries_m": _float_list(boundary),
    }
    if shells == 1 and boundary is None:
        overrides["partition.shell_boundaries_m"] = []
    return overrides


def _parallel_level(parallel: int) -> int:
    level = resolve_parallel_level(parallel)
    if parallel <= 0:
        print(f"'parallel_level' set to {level}", file=sys.stderr)
    return level


@plac.annotations(
    frames=("directory of <name>.ply and <name>.pose.txt frames", "option", "f", Path),
    stride=("keep every stride-th frame", "option", "s", int),
    radius=("match radius in meters", "option", "r", float),
    min_overlap=("minimum overlap ratio to keep a pair", "option", "m", float),
    voxel_size=("voxel size in meters before matching", "option", "v", float),
    out=("output directory", "option", "o", Path),
    config=("run-config file", "option", "C", Path),
    parallel=("parallel level (default=1, all_cpus=0)", "option", "p", int),
)
def run_mine_pairs(frames=None, stride=None, radius=None, min_overlap=None, voxel_size=None, out=None, config=None, parallel=None):
    setup_logging()
    cfg = load_config(config, {
        "mining.stride": stride, "mining.radius": radius, "mining.min_overlap": min_overlap,
        "mining.voxel_size": voxel_size, "system.parallel": parallel,
    })
    mining = mining_config(cfg)
    loaded = read_frames(frames)
    keep = set(subsample_frames([name for name, _, _ in loaded], mining.stride))
    loaded = [entry for entry in loaded if entry[0] in keep]
    print(f"{len(loaded)} frames selected from {frames}", file=sys.stderr)
    names = [name for name, _, _ in loaded]
    prepared = prepare_frames([(cloud, pose) for _, cloud, pose in loaded], mining.voxel_size)
    kept = mine_pairs(
        prepared, mining.radius, mining.min_overlap, None, names, _parallel_level(cfg["system"]["parallel"]),
    )
    out = Path(out)
    (out / "pairs").mkdir(parents=True, exist_ok=True)
    used = sorted({name for pair, _ in kept for name in (pair.frame_a_id, pair.frame_b_id)})
    for name, (cloud, pose) in zip(names, prepared):
        if name in used:
            write_frame(out / "frames", name, cloud, pose)
    entries = []
    for pair, matches in kept:
        relative = "pairs/{}{}{}.txt".format(pair.frame_a_id, PAIR_SEPARATOR, pair.frame_b_id)
        write_correspondences(out / relative, matches, pair.overlap_ratio)
        entries.append({
            "frame_a": pair.frame_a_id,
            "frame_b": pair.frame_b_id,
            "overlap": pair.overlap_ratio,
            "correspondences": relative,
        })
    write_pairs_index(out / PAIRS_INDEX, entries, {"mining": dict(cfg["mining"])})
    print(f"{len(entries)} pairs written to {out}", file=sys.stderr)


def main_mine_pairs():
    plac.call(run_mine_pairs)


@plac.annotations(
    cloud=("point cloud (PLY)", "option", "c", Path),
    anchors=("comma separated anchor indices", "option", "a", str),
    sectors=("number of angular sectors", "option", "s", int),
    shells=("number of radial shells", "option", "r", int),
    boundary=("comma separated shell boundaries in meters", "option", "b", str),
    out=("output JSON path", "option", "o", Path),
    config=("run-config file", "option", "C", Path),
)
def run_partition(cloud=None, anchors=None, sectors=None, shells=None, boundary=None, out=None, config=None):
    setup_logging()
    cfg = load_config(config, _partition_overrides(sectors, shells, boundary))
    partitions = partition_config(cfg)
    points = read_ply(cloud)
    assignments = []
    for anchor in _int_list(anchors) or []:
        assignment = assign_partitions(partitions, anchor, points, points)
        assignments.append({
            "anchor": anchor,
            "partition_of": assignment.partition_of.tolist(),
            "counts": assignment.counts().tolist(),
        })
    srsly.write_json(out, {"config": partitions.to_dict(), "assignments": assignments})


def main_partition():
    plac.call(run_partition)


def _load_scene_pairs(pairs_dir: Path) -> List[ScenePair]:
    frames = {}
    for name, cloud, pose in read_frames(pairs_dir / "frames"):
        frames[name] = (cloud, pose)
    scene_pairs = []
    for entry in read_pairs_index(pairs_dir / PAIRS_INDEX):
        matches, _ = read_correspondences(pairs_dir / entry["correspondences"])
        cloud_a, pose_a = frames[entry["frame_a"]]
        cloud_b, pose_b = frames[entry["frame_b"]]
        pair_id = "{}{}{}".format(entry["frame_a"], PAIR_SEPARATOR, entry["frame_b"])
        scene_pairs.append(ScenePair(cloud_a, cloud_b, matches, pose_a, pose_b, pair_id))
    return scene_pairs


@plac.annotations(
    pairs=("output directory of mine-pairs", "option", "i", Path),
    sectors=("number of angular sectors", "option", "s", int),
    shells=("number of radial shells", "option", "r", int),
    tau=("temperature", "option", "t", float),
    n=("sampled matches per pair and step", "option", "n", int),
    steps=("SGD steps", "option", "k", int),
    lr=("learning rate", "option", "l", float),
    dim=("embedding dimension", "option", "d", int),
    seed=("random seed", "option", "e", int),
    out=("output directory for features", "option", "o", Path),
    config=("run-config file", "option", "C", Path),
)
def run_pretrain_toy(
    pairs=None, sectors=None, shells=None, tau=None, n=None, steps=None, lr=None, dim=None, seed=None, out=None, config=None,
):
    setup_logging()
    overrides = _partition_overrides(sectors, shells, None)
    overrides.update({
        "loss.temperature": tau,
        "loss.num_sampled_matches": n, "optimizer.steps": steps, "optimizer.lr": lr, "optimizer.dim": dim,
        "optimizer.seed": seed,
    })
    cfg = load_config(config, overrides)
    scene_pairs = _load_scene_pairs(Path(pairs))
    loss_cfg = loss_config(cfg)
    opt = optimizer_config(cfg)
    print(f"training on {len(scene_pairs)} pairs, P={loss_cfg.num_partitions}, {opt.steps} steps", file=sys.stderr)
    result = train_embeddings(scene_pairs, loss_cfg, opt)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for pair, (f1, f2) in zip(scene_pairs, result.features):
        write_features(out / "{}.a.ftrs".format(pair.pair_id), f1)
        write_features(out / "{}.b.ftrs".format(pair.pair_id), f2)
    write_loss_curve(out / "loss.csv", result)
    print(f"loss {result.initial_loss:.4f} -> {result.final_loss:.4f}", file=sys.stderr)


def main_pretrain_toy():
    plac.call(run_pretrain_toy)


@plac.annotations(
    scene=("scene point cloud (PLY)", "option", "s", Path),
    features=("per-point features (FTRS)", "option", "f", Path),
    budget=("points to select", "option", "b", int),
    strategy=("selection strategy", "option", "t", str, ["random", "kmeans_raw", "kmeans_features"]),
    seed=("random seed", "option", "e", int),
    out=("output selection file", "option", "o", Path),
    mask=("also write the sparse label mask (MASK)", "option", "m", Path),
    config=("run-config file", "option", "C", Path),
)
def run_select_points(scene=None, features=None, budget=None, strategy=None, seed=None, out=None, mask=None, config=None):
    setup_logging()
    cfg = load_config(config, {"select.budget": budget, "select.strategy": strategy, "select.seed": seed})
    select = select_config(cfg)
    cloud = read_ply(scene)
    feature_matrix = read_features(features) if features else None
    selection = select_points(
        cloud, feature_matrix, select.budget, select.strategy, select.seed, select.iterations, select.xyz_weight,
    )
    write_selection(out, selection)
    if mask:
        write_mask(mask, expand_labels(cloud, selection))
    print(f"{len(selection)} points selected by {select.strategy}", file=sys.stderr)


def main_select_points():
    plac.call(run_select_points)


@plac.annotations(
    cloud=("point cloud (PLY)", "option", "c", Path),
    offsets=("per-point offsets (OFFS)", "option", "f", Path),
    scores=("per-point semantic scores (FTRS)", "option", "s", Path),
    radius=("ball radius in meters", "option", "r", float),
    min_size=("minimum points per instance", "option", "m", int),
    out=("output prediction file", "option", "o", Path),
    config=("run-config file", "option", "C", Path),
)
def run_cluster_instances(cloud=None, offsets=None, scores=None, radius=None, min_size=None, out=None, config=None):
    setup_logging()
    cfg = load_config(config, {"cluster.radius": radius, "cluster.min_cluster_size": min_size})
    points = read_ply(cloud)
    pred, _ = decode_instances(points, read_offsets(offsets), read_features(scores), cluster_config(cfg))
    write_prediction(out, pred)
    print(f"{pred.num_instances} instances", file=sys.stderr)


def main_cluster_instances():
    plac.call(run_cluster_instances)


@plac.annotations(
    task=("evaluation task", "option", "t", str, ["sem", "ins"]),
    pred=("prediction file", "option", "p", Path),
    gt=("ground truth file (PLY with label / instance_id)", "option", "g", Path),
    num_classes=("number of semantic classes", "option", "n", int),
    json_path=("write the JSON summary here", "option", "j", Path),
    csv_path=("write the CSV report here", "option", "c", Path),
)
def run_evaluate(task="sem", pred=None, gt=None, num_classes=None, json_path=None, csv_path=None):
    setup_logging()
    if task == "sem":
        gt_labels = read_labels(gt)
        pred_labels = read_labels(pred)
        if num_classes is None:
            num_classes = int(gt_labels[gt_labels != IGNORE_LABEL].max()) + 1
        report = evaluate_semantic(pred_labels, gt_labels, num_classes, {"task": task})
    else:
        gt_cloud = read_ply(gt)
        if gt_cloud.instance_labels is None or gt_cloud.semantic_labels is None:
            raise EvaluationError(Errors.E044)
        gt_instances = InstancePrediction.from_labels(gt_cloud.instance_labels, gt_cloud.semantic_labels)
        report = evaluate_instances(read_prediction(pred), gt_instances, {"task": task})
    if json_path:
        write_report_json(json_path, report)
    if csv_path:
        write_report_csv(csv_path, report)
    print("{}\t{:.6f}".format(report.metric, report.value))
    for cls, value in sorted(report.per_class.items()):
        print("{}\t{:.6f}".format(cls, value))


def main_evaluate():
    plac.call(run_evaluate)


@plac.annotations(
    points=("comma separated sampled-match counts", "option", "n", str),
    partitions=("comma separated partition counts", "option", "k", str),
    seed=("random seed", "option", "e", int),
    steps=("SGD steps per cell", "option", "s", int),
    lr=("learning rate", "option", "l", float),
    num_pairs=("synthetic scene pairs", "option", "m", int),
    out=("output CSV path", "option", "o", Path),
    config=("run-config file", "option", "C", Path),
    parallel=("parallel level (default=1, all_cpus=0)", "option", "p", int),
)
def run_sweep(points=None, partitions=None, seed=None, steps=None, lr=None, num_pairs=None, out=None, config=None, parallel=None):
    setup_logging()
    cfg = load_config(config, {
        "bench.points_grid": _int_list(points), "bench.partitions_grid": _int_list(partitions),
        "bench.num_pairs": num_pairs, "optimizer.seed": seed, "optimizer.steps": steps, "optimizer.lr": lr,
        "system.parallel": parallel,
    })
    opt = optimizer_config(cfg)
    bench = cfg["bench"]
    dataset = make_synthetic_dataset(int(bench["num_pairs"]), seed=opt.seed)
    result = sweep_partitions(
        bench["points_grid"], bench["partitions_grid"], dataset, loss_config(cfg), opt,
        parallel_level=_parallel_level(cfg["system"]["parallel"]),
    )
    if out:
        write_sweep_csv(out, result)
    for num_points, row in zip(result.points_grid, result.margins):
        print("\t".join([str(num_points)] + ["{:.4f}".format(value) for value in row]))


def main_sweep():
    plac.call(run_sweep)


@plac.annotations(
    num_scenes=("number of scenes", "option", "n", int),
    num_objects=("objects per scene", "option", "k", int),
    extent=("room edge length in meters", "option", "x", float),
    noise=("per-view position noise in meters", "option", "z", float),
    overlap=("view overlap in [0, 1]", "option", "v", float),
    seed=("random seed", "option", "e", int),
    out=("output directory", "option", "o", Path),
)
def run_synth_scenes(num_scenes=1, num_objects=6, extent=3.0, noise=0.002, overlap=0.5, seed=0, out=None):
    setup_logging()
    out = Path(out)
    seeds = np.random.default_rng(seed).integers(0, 2 ** 31, size=num_scenes)
    for index, scene_seed in enumerate(seeds):
        scene = generate_synthetic_scene(num_objects, extent, noise, int(scene_seed), overlap=overlap)
        scene_dir = out / "scene_{:03d}".format(index)
        for view_index, view in enumerate(scene.views):
            write_frame(scene_dir, "frame_{:03d}".format(view_index), view.cloud, view.pose)
        write_ply(scene_dir / "gt.ply", scene.cloud)
        write_offsets(scene_dir / "gt.offs", scene.offsets)
        write_features(scene_dir / "gt_scores.ftrs", one_hot_scores(scene.cloud.semantic_labels))
        write_correspondences(scene_dir / "gt_pairs.txt", scene.correspondences)
    print(f"{num_scenes} scenes written to {out}", file=sys.stderr)


def main_synth_scenes():
    plac.call(run_synth_scenes)


COMMANDS = {
    "mine-pairs": run_mine_pairs,
    "partition": run_partition,
    "pretrain-toy": run_pretrain_toy,
    "select-points": run_select_points,
    "cluster-instances": run_cluster_instances,
    "evaluate": run_evaluate,
    "sweep": run_sweep,
    "synth-scenes": run_synth_scenes,
}


def main_sck(argv: Optional[List[str]] = None):
    argv = sys.argv[1:] if argv is None else argv
    if not argv or argv[0] not in COMMANDS:
        print("usage: sck {{{}}} [options]".format(",".join(COMMANDS)), file=sys.stderr)
        sys.exit(0 if argv and argv[0] in ("-h", "--help") else 2)
    plac.call(COMMANDS[argv[0]], argv[1:])
