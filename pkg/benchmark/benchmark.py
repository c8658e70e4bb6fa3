from datetime import datetime
import json
import sys


REPEAT = 5
NUM_PAIRS = 4
NUM_SAMPLES = 4096
STEPS = 10

assert len(sys.argv) >= 2, f"Usage: python {sys.argv[0]} num_partitions1 [num_partitions2 [...]]"
partition_counts = [int(arg) for arg in sys.argv[1:]]

print("timestamp                 ", "[msec]", "procedure description", sep="\t", file=sys.stderr)
start = datetime.now()
prev = start
print(start, 0, f"benchmark started with partitions {partition_counts}", sep="\t", file=sys.stderr)

from sckit import (
    InstancePrediction, LossConfig, OptimizerConfig, PartitionConfig, decode_instances, generate_synthetic_scene,
    instance_map50, make_synthetic_dataset, miou, mine_pairs, select_points, synthetic_instance_features,
    train_embeddings,
)
from sckit.synthetic import one_hot_scores
lap = datetime.now()
dur = int((lap - prev).total_seconds() * 1000)
print(lap, dur, 'import sckit', sep="\t", file=sys.stderr)
prev = lap


def _lap(results, key, description, scale=1):
    global prev
    lap = datetime.now()
    dur = int((lap - prev).total_seconds() * 1000)
    results.setdefault(key, []).append(dur / scale)
    print(lap, dur, description, sep="\t", file=sys.stderr)
    prev = lap


results = {}
pairs = make_synthetic_dataset(NUM_PAIRS, seed=0)
_lap(results, "make_synthetic_dataset()", f"make_synthetic_dataset({NUM_PAIRS})")

for repeat in range(1, REPEAT + 1):
    frames = [(pair.cloud_a, pair.pose_a) for pair in pairs] + [(pair.cloud_b, pair.pose_b) for pair in pairs]
    mine_pairs(frames)
    _lap(results, "mine_pairs()", f"#{repeat} mine_pairs({len(frames)} frames)")

for num_partitions in partition_counts:
    cfg = LossConfig(partition_config=PartitionConfig.from_num_partitions(num_partitions), num_sampled_matches=NUM_SAMPLES)
    key = f"train_embeddings(P={num_partitions})"
    for repeat in range(1, REPEAT + 1):
        train_embeddings(pairs, cfg, OptimizerConfig(steps=STEPS, seed=repeat))
        _lap(results, key, f"#{repeat} {key}: {STEPS} steps, per step", STEPS)

scene = generate_synthetic_scene(12, 3.5, seed=0)
features = synthetic_instance_features(scene.cloud)
for strategy in ("random", "kmeans_raw", "kmeans_features"):
    for repeat in range(1, REPEAT + 1):
        select_points(scene.cloud, features, 20, strategy, repeat)
        _lap(results, f"select_points({strategy})", f"#{repeat} select_points({strategy}, budget=20)")

scores = one_hot_scores(scene.cloud.semantic_labels)
for repeat in range(1, REPEAT + 1):
    decode_instances(scene.cloud, scene.offsets, scores)
    _lap(results, "decode_instances()", f"#{repeat} decode_instances({len(scene.cloud)} points)")

pred, semantic = decode_instances(scene.cloud, scene.offsets, scores)
gt = InstancePrediction.from_labels(scene.cloud.instance_labels, scene.cloud.semantic_labels)
prev = datetime.now()
for repeat in range(1, REPEAT + 1):
    miou(semantic, scene.cloud.semantic_labels, scores.shape[1])
    instance_map50(pred, gt)
    _lap(results, "evaluate()", f"#{repeat} miou + instance_map50")

lap = datetime.now()
dur = int((lap - start).total_seconds() * 1000)
print(lap, dur, 'finished', sep="\t", file=sys.stderr)

for k, v in results.items():
    l = sorted(v)
    results[k] = l[len(l) // 2]

json.dump({"partitions": partition_counts, "results": results}, sys.stdout)
print()
