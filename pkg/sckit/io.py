# coding: utf8
import struct
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import srsly
from plyfile import PlyData, PlyElement

from .active_labeling import SelectionResult
from .cloud import PointCloud, Pose
from .contrastive import FeatureMatrix
from .errors import Errors, FormatError
from .instance_clustering import UNASSIGNED, InstancePrediction
from .pair_mining import DEFAULT_MATCH_RADIUS, CorrespondenceSet

__all__ = [
    "read_ply",
    "write_ply",
    "read_pose",
    "write_pose",
    "read_features",
    "write_features",
    "read_correspondences",
    "write_correspondences",
    "read_offsets",
    "write_offsets",
    "read_mask",
    "write_mask",
    "read_labels",
    "read_selection",
    "write_selection",
    "read_prediction",
    "write_prediction",
    "read_frames",
    "write_frame",
    "read_pairs_index",
    "write_pairs_index",
    "POSE_SUFFIX",
]


PathLike = Union[str, Path]

POSE_SUFFIX = ".pose.txt"
_HEADER = struct.Struct("<4sI")
_FTRS_HEADER = struct.Struct("<4sII")


def read_ply(path: PathLike) -> PointCloud:
    """x/y/z plus optional red/green/blue, label and instance_id vertex properties."""
    ply = PlyData.read(str(path))
    if "vertex" not in [element.name for element in ply.elements]:
        raise FormatError(Errors.E082.format(path=path))
    vertex = ply["vertex"].data
    names = set(vertex.dtype.names or ())
    if not {"x", "y", "z"} <= names:
        raise FormatError(Errors.E082.format(path=path))
    positions = np.stack([np.asarray(vertex[axis], dtype=np.float64) for axis in "xyz"], axis=1)
    colors = None
    if {"red", "green", "blue"} <= names:
        colors = np.stack([np.asarray(vertex[channel]) for channel in ("red", "green", "blue")], axis=1)
    semantic = np.asarray(vertex["label"]) if "label" in names else None
    instance = np.asarray(vertex["instance_id"]) if "instance_id" in names else None
    return PointCloud(positions, colors, semantic, instance)


def write_ply(path: PathLike, cloud: PointCloud, text: bool = False):
    """Binary little endian by default, ASCII with text=True."""
    dtype = [("x", "f4"), ("y", "f4"), ("z", "f4")]
    if cloud.colors is not None:
        dtype += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    if cloud.semantic_labels is not None:
        dtype.append(("label", "i4"))
    if cloud.instance_labels is not None:
        dtype.append(("instance_id", "i4"))
    vertex = np.empty(len(cloud), dtype=dtype)
    for d, axis in enumerate("xyz"):
        vertex[axis] = cloud.positions[:, d]
    if cloud.colors is not None:
        for c, channel in enumerate(("red", "green", "blue")):
            vertex[channel] = cloud.colors[:, c]
    if cloud.semantic_labels is not None:
        vertex["label"] = cloud.semantic_labels
    if cloud.instance_labels is not None:
        vertex["instance_id"] = cloud.instance_labels
    PlyData([PlyElement.describe(vertex, "vertex")], text=text, byte_order="<").write(str(path))


def read_pose(path: PathLike) -> Pose:
    try:
        values = np.array(Path(path).read_text(encoding="utf-8").split(), dtype=np.float64)
    except ValueError:
        raise FormatError(Errors.E083.format(path=path))
    if values.size != 16:
        raise FormatError(Errors.E083.format(path=path))
    matrix = values.reshape(4, 4)
    if not np.allclose(matrix[3], [0.0, 0.0, 0.0, 1.0]):
        raise FormatError(Errors.E083.format(path=path))
    return Pose.from_matrix(matrix)


def write_pose(path: PathLike, pose: Pose):
    lines = [" ".join("{:.17g}".format(value) for value in row) for row in pose.matrix]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_payload(path: PathLike, magic: bytes, header: struct.Struct = _HEADER):
    data = Path(path).read_bytes()
    if len(data) < header.size:
        raise FormatError(Errors.E081.format(path=path, expected=header.size, found=len(data)))
    fields = header.unpack_from(data)
    if fields[0] != magic:
        raise FormatError(Errors.E080.format(path=path, expected=magic, found=fields[0]))
    return fields[1:], data[header.size:]


def _check_length(path: PathLike, payload: bytes, expected: int):
    if len(payload) != expected:
        raise FormatError(Errors.E081.format(path=path, expected=expected, found=len(payload)))


def read_features(path: PathLike) -> FeatureMatrix:
    """FTRS: magic, u32 N, u32 D, then N x D little-endian float32."""
    (rows, dim), payload = _read_payload(path, b"FTRS", _FTRS_HEADER)
    _check_length(path, payload, rows * dim * 4)
    return FeatureMatrix(np.frombuffer(payload, dtype="<f4").reshape(rows, dim))


def write_features(path: PathLike, features: Union[FeatureMatrix, np.ndarray]):
    values = features.values if isinstance(features, FeatureMatrix) else np.asarray(features, dtype=np.float64)
    values = values.reshape(len(values), -1)
    with open(path, "wb") as f:
        f.write(_FTRS_HEADER.pack(b"FTRS", values.shape[0], values.shape[1]))
        f.write(values.astype("<f4").tobytes())


def read_correspondences(path: PathLike) -> Tuple[CorrespondenceSet, Optional[float]]:
    """(correspondences, overlap); `.corr` files are binary and carry no overlap or radius."""
    if Path(path).suffix == ".corr":
        (count,), payload = _read_payload(path, b"CORR")
        _check_length(path, payload, count * 8)
        pairs = np.frombuffer(payload, dtype="<u4").reshape(count, 2).astype(np.int64)
        return CorrespondenceSet(pairs, DEFAULT_MATCH_RADIUS), None
    radius, overlap = DEFAULT_MATCH_RADIUS, None
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, _, value = token.partition("=")
                    if key == "match_radius":
                        radius = float(value)
                    elif key == "overlap":
                        overlap = float(value)
                continue
            fields = line.split()
            if len(fields) != 2:
                raise FormatError(Errors.E084.format(line_no=line_no, path=path, line=line))
            rows.append((int(fields[0]), int(fields[1])))
    return CorrespondenceSet(np.asarray(rows, dtype=np.int64).reshape(-1, 2), radius), overlap


def write_correspondences(path: PathLike, matches: CorrespondenceSet, overlap: float = 0.0):
    if Path(path).suffix == ".corr":
        with open(path, "wb") as f:
            f.write(_HEADER.pack(b"CORR", len(matches)))
            f.write(matches.pairs.astype("<u4").tobytes())
        return
    with open(path, "w", encoding="utf-8") as f:
        print("# match_radius={} overlap={}".format(matches.match_radius, overlap), file=f)
        for i, j in matches:
            print(i, j, file=f)


def read_offsets(path: PathLike) -> np.ndarray:
    """OFFS: magic, u32 N, N x 3 little-endian float32."""
    (count,), payload = _read_payload(path, b"OFFS")
    _check_length(path, payload, count * 12)
    return np.frombuffer(payload, dtype="<f4").reshape(count, 3).astype(np.float64)


def write_offsets(path: PathLike, offsets: np.ndarray):
    offsets = np.asarray(offsets, dtype=np.float64).reshape(-1, 3)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(b"OFFS", len(offsets)))
        f.write(offsets.astype("<f4").tobytes())


def read_mask(path: PathLike) -> np.ndarray:
    """MASK: magic, u32 N, N bytes of labels (255 = ignore)."""
    (count,), payload = _read_payload(path, b"MASK")
    _check_length(path, payload, count)
    return np.frombuffer(payload, dtype=np.uint8).copy()


def write_mask(path: PathLike, mask: np.ndarray):
    mask = np.asarray(mask, dtype=np.uint8).reshape(-1)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(b"MASK", len(mask)))
        f.write(mask.tobytes())


def read_labels(path: PathLike) -> np.ndarray:
    """Per-point semantic labels from a PLY, a MASK file or a text file with one label per line."""
    suffix = Path(path).suffix
    if suffix == ".ply":
        cloud = read_ply(path)
        if cloud.semantic_labels is None:
            raise FormatError(Errors.E085.format(path=path, field="label"))
        return cloud.semantic_labels
    if suffix == ".mask":
        return read_mask(path).astype(np.int64)
    with open(path, "r", encoding="utf-8") as f:
        return np.array([int(line) for line in f if line.strip() and not line.startswith("#")], dtype=np.int64)


def read_selection(path: PathLike) -> SelectionResult:
    header: Dict[str, str] = {}
    indices = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                header.update(token.partition("=")[::2] for token in line[1:].split())
                continue
            try:
                indices.append(int(line))
            except ValueError:
                raise FormatError(Errors.E084.format(line_no=line_no, path=path, line=line))
    return SelectionResult(
        np.asarray(indices, dtype=np.int64),
        header.get("strategy", "random"),
        int(header.get("budget", len(indices))),
        int(header.get("seed", 0)),
    )


def write_selection(path: PathLike, selection: SelectionResult):
    with open(path, "w", encoding="utf-8") as f:
        print("# strategy={} budget={} seed={}".format(selection.strategy, selection.budget, selection.seed), file=f)
        for index in selection.selected_indices:
            print(int(index), file=f)


def write_prediction(path: PathLike, pred: InstancePrediction):
    """'# instances' section of 'instance_id class confidence', then '# points' of 'point_index instance_id'."""
    confidences = pred.confidences if pred.confidences is not None else np.ones(pred.num_instances)
    with open(path, "w", encoding="utf-8") as f:
        print("# instances", file=f)
        for instance, (cls, confidence) in enumerate(zip(pred.instance_classes, confidences)):
            print(instance, int(cls), repr(float(confidence)), file=f)
        print("# points", file=f)
        for index, instance in enumerate(pred.instance_ids):
            print(index, int(instance), file=f)


def read_prediction(path: PathLike) -> InstancePrediction:
    section = None
    instances: List[Tuple[int, int, float]] = []
    points: List[Tuple[int, int]] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                section = line[1:].strip()
                continue
            fields = line.split()
            if section == "instances" and len(fields) == 3:
                instances.append((int(fields[0]), int(fields[1]), float(fields[2])))
            elif section == "points" and len(fields) == 2:
                points.append((int(fields[0]), int(fields[1])))
            else:
                raise FormatError(Errors.E084.format(line_no=line_no, path=path, line=line))
    instances.sort()
    ids = np.full(len(points), UNASSIGNED, dtype=np.int64)
    for index, instance in points:
        ids[index] = instance
    return InstancePrediction(
        ids,
        np.array([cls for _, cls, _ in instances], dtype=np.int64),
        np.array([confidence for _, _, confidence in instances], dtype=np.float64),
    )


def read_frames(directory: PathLike) -> List[Tuple[str, PointCloud, Pose]]:
    """Every <name>.ply with a sibling <name>.pose.txt, ordered by name."""
    frames = []
    for ply_path in sorted(Path(directory).glob("*.ply")):
        pose_path = ply_path.with_name(ply_path.stem + POSE_SUFFIX)
        if not pose_path.exists():
            continue
        frames.append((ply_path.stem, read_ply(ply_path), read_pose(pose_path)))
    return frames


def write_frame(directory: PathLike, name: str, cloud: PointCloud, pose: Pose):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_ply(directory / (name + ".ply"), cloud)
    write_pose(directory / (name + POSE_SUFFIX), pose)


def read_pairs_index(path: PathLike) -> List[dict]:
    return list(srsly.read_json(path)["pairs"])


def write_pairs_index(path: PathLike, entries: List[dict], config: Optional[dict] = None):
    srsly.write_json(path, {"config": config or {}, "pairs": entries})
