"""Synthetic skeleton-action data, dataset file I/O, preprocessing,
training/evaluation loops, and score-level fusion.

The generator draws from a small family of parametric motions on a chain
skeleton. Two of the core classes share every per-joint pose statistic
and differ only in the phase relation between the two chain ends, so
they can only be told apart through temporal joint interactions.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import ArgumentError, ConfigError, DataError, ParseError, StructuralError
from .rng import spawn_rng
from .tensor import Tensor

DATASET_MAGIC = b"SKEL0001"
DATASET_VERSION = 1


@dataclass
class SkeletonSample:
    """One action clip: (C, T, V, M) coordinates plus a class label."""

    coords: np.ndarray
    label: int

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float32)
        if self.coords.ndim != 4:
            raise StructuralError(f"coords must be (C, T, V, M), got {self.coords.shape}")


@dataclass
class DatasetSplit:
    train: list[SkeletonSample]
    validation: list[SkeletonSample]
    test: list[SkeletonSample]
    classes: int
    edges: tuple[tuple[int, int], ...]
    root: int = 0

    def all_samples(self) -> list[SkeletonSample]:
        return [*self.train, *self.validation, *self.test]

    def dims(self) -> tuple[int, int, int, int]:
        """(C, T, V, M) shared by every sample."""
        sample = self.all_samples()[0]
        return sample.coords.shape

    def split_named(self, name: str) -> list[SkeletonSample]:
        table = {"train": self.train, "validation": self.validation, "test": self.test}
        if name not in table:
            raise ArgumentError(f"unknown split {name!r}")
        return table[name]


@dataclass(frozen=True)
class GeneratorConfig:
    classes: int = 3
    samples_per_class: int = 100
    joints: int = 5
    frames: int = 32
    channels: int = 2
    noise: float = 0.08
    amplitude: float = 1.0
    cycles: float = 2.0
    split_fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)

    def __post_init__(self):
        if self.classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.classes}")
        if self.joints < 4:
            raise ConfigError(f"chain motions need at least 4 joints, got {self.joints}")
        if self.frames < 2 or self.samples_per_class < 1:
            raise ConfigError("frames and samples_per_class must be positive")
        if self.channels not in (2, 3):
            raise ConfigError(f"channels must be 2 or 3, got {self.channels}")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ConfigError("split fractions must sum to 1")


def chain_edges(joints: int) -> tuple[tuple[int, int], ...]:
    return tuple((i, i + 1) for i in range(joints - 1))


def _rotate(offset: np.ndarray, angle: np.ndarray) -> np.ndarray:
    """Rotate 2-D offsets by per-frame angles; offset (2,), angle (T,)."""
    cos, sin = np.cos(angle), np.sin(angle)
    return np.stack([cos * offset[0] - sin * offset[1],
                     sin * offset[0] + cos * offset[1]], axis=0)


def _motion_coords(cfg: GeneratorConfig, label: int, phase: float) -> np.ndarray:
    """Noise-free joint trajectories (2, T, V) for one sample.

    Class 0: both end joints swing about their parents in phase.
    Class 1: same swing, opposite phase between the two ends. Classes 0
    and 1 therefore visit identical per-joint pose sets at identical
    rates; only the cross-joint phase relation separates them.
    Class 2: the whole chain turns rigidly through one revolution.
    Classes beyond 2 reuse the in-phase swing at higher frequencies.
    """
    v, t = cfg.joints, cfg.frames
    root = v // 2
    base = np.zeros((2, v))
    base[0] = (np.arange(v) - root) * 0.5
    coords = np.repeat(base[:, None, :], t, axis=1)  # (2, T, V)
    steps = np.arange(t) / t

    if label == 2:
        angle = 2.0 * np.pi * steps + phase
        offsets = base - base[:, [root]]
        cos, sin = np.cos(angle)[:, None], np.sin(angle)[:, None]
        rotated = np.stack([
            cos * offsets[0][None, :] - sin * offsets[1][None, :],
            sin * offsets[0][None, :] + cos * offsets[1][None, :],
        ], axis=0)
        return rotated + base[:, None, [root]]

    cycles = cfg.cycles if label <= 1 else cfg.cycles * label
    swing = cfg.amplitude * np.sin(2.0 * np.pi * cycles * steps + phase)
    left_tip, right_tip = 0, v - 1
    left_parent, right_parent = 1, v - 2
    left_sign = 1.0
    right_sign = -1.0 if label == 1 else 1.0
    for tip, parent, sign in ((left_tip, left_parent, left_sign),
                              (right_tip, right_parent, right_sign)):
        offset = base[:, tip] - base[:, parent]
        coords[:, :, tip] = base[:, [parent]] + _rotate(offset, sign * swing)
    return coords


def generate_synthetic(cfg: GeneratorConfig, seed: int) -> DatasetSplit:
    """Deterministic synthetic dataset, stratified into train/val/test."""
    rng = spawn_rng(seed, "datagen")
    per_split: tuple[list, list, list] = ([], [], [])
    n_train = round(cfg.split_fractions[0] * cfg.samples_per_class)
    n_val = round(cfg.split_fractions[1] * cfg.samples_per_class)
    for label in range(cfg.classes):
        for idx in range(cfg.samples_per_class):
            phase = float(rng.uniform(0.0, 2.0 * np.pi))
            motion = _motion_coords(cfg, label, phase)
            coords = np.zeros((cfg.channels, cfg.frames, cfg.joints, 1), dtype=np.float32)
            coords[:2, :, :, 0] = motion
            if cfg.noise > 0:
                coords += rng.normal(0.0, cfg.noise, size=coords.shape).astype(np.float32)
            sample = SkeletonSample(coords=coords, label=label)
            if idx < n_train:
                per_split[0].append(sample)
            elif idx < n_train + n_val:
                per_split[1].append(sample)
            else:
                per_split[2].append(sample)
    shuffle_rng = spawn_rng(seed, "datagen-shuffle")
    for bucket in per_split:
        order = shuffle_rng.permutation(len(bucket))
        bucket[:] = [bucket[i] for i in order]
    if not per_split[1]:
        raise ConfigError("validation split is empty; increase samples_per_class")
    return DatasetSplit(
        train=per_split[0], validation=per_split[1], test=per_split[2],
        classes=cfg.classes, edges=chain_edges(cfg.joints), root=cfg.joints // 2,
    )


def preprocess(sample: SkeletonSample, target_frames: int, max_bodies: int = 2) -> SkeletonSample:
    """Cyclic frame repetition to ``target_frames``; zero-pad bodies."""
    c, t, v, m = sample.coords.shape
    if t < 1:
        raise DataError("sample has no frames")
    if m > max_bodies:
        raise DataError(f"sample has {m} bodies, limit is {max_bodies}")
    idx = np.arange(target_frames) % t
    coords = sample.coords[:, idx, :, :]
    if m < max_bodies:
        padded = np.zeros((c, target_frames, v, max_bodies), dtype=np.float32)
        padded[:, :, :, :m] = coords
        coords = padded
    return SkeletonSample(coords=coords, label=sample.label)


def _parent_index(edges, num_joints: int, root: int) -> np.ndarray:
    """Parent of every joint in the tree rooted at ``root``; root maps to
    itself. Rejects edge sets that are not a spanning tree."""
    if len(edges) != num_joints - 1:
        raise StructuralError(
            f"{len(edges)} edges cannot form a tree on {num_joints} joints"
        )
    neighbors: list[list[int]] = [[] for _ in range(num_joints)]
    for i, j in edges:
        if not (0 <= i < num_joints and 0 <= j < num_joints):
            raise StructuralError(f"edge ({i}, {j}) out of range")
        neighbors[i].append(j)
        neighbors[j].append(i)
    parent = np.full(num_joints, -1, dtype=np.int64)
    parent[root] = root
    queue = [root]
    seen = 1
    while queue:
        node = queue.pop()
        for nxt in neighbors[node]:
            if parent[nxt] == -1:
                parent[nxt] = node
                queue.append(nxt)
                seen += 1
    if seen != num_joints:
        raise StructuralError("edge set is not connected")
    return parent


def bone_transform(sample: SkeletonSample, edges, root: int = 0) -> SkeletonSample:
    """Second-order features: child coordinates minus parent coordinates.

    The root joint keeps a zero bone; rigid translations cancel exactly.
    """
    v = sample.coords.shape[2]
    parent = _parent_index(edges, v, root)
    bones = sample.coords - sample.coords[:, :, parent, :]
    return SkeletonSample(coords=bones, label=sample.label)


def apply_stream(samples: list[SkeletonSample], stream: str, edges, root: int) -> list[SkeletonSample]:
    if stream == "joint":
        return samples
    if stream == "bone":
        return [bone_transform(s, edges, root=root) for s in samples]
    raise ArgumentError(f"unknown stream {stream!r}")


# -- dataset container --


def save_dataset(path, split: DatasetSplit) -> None:
    """Single binary container plus a plain-text edge-list sidecar."""
    samples = split.all_samples()
    c, t, v, m = split.dims()
    for s in samples:
        if s.coords.shape != (c, t, v, m):
            raise StructuralError("all samples must share one shape")
    path = str(path)
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack(
            "<IIIIIIIII", DATASET_VERSION, c, t, v, m, split.classes,
            len(split.train), len(split.validation), len(split.test),
        ))
        for s in samples:
            fh.write(np.ascontiguousarray(s.coords, dtype="<f4").tobytes())
        labels = np.asarray([s.label for s in samples], dtype="<i4")
        fh.write(labels.tobytes())
    with open(path + ".edges", "w", encoding="utf-8") as fh:
        fh.write(f"# root {split.root}\n")
        for i, j in split.edges:
            fh.write(f"{i} {j}\n")


def load_dataset(path) -> DatasetSplit:
    path = str(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(DATASET_MAGIC)] != DATASET_MAGIC:
        raise ParseError(f"{path}: bad magic, not a dataset file")
    header = struct.unpack_from("<IIIIIIIII", blob, len(DATASET_MAGIC))
    version, c, t, v, m, classes, n_train, n_val, n_test = header
    if version != DATASET_VERSION:
        raise ParseError(f"{path}: unsupported dataset version {version}")
    total = n_train + n_val + n_test
    off = len(DATASET_MAGIC) + 9 * 4
    frame_size = c * t * v * m
    need = off + total * frame_size * 4 + total * 4
    if len(blob) != need:
        raise ParseError(f"{path}: size {len(blob)} != expected {need}")
    coords = np.frombuffer(blob, dtype="<f4", count=total * frame_size, offset=off)
    coords = coords.reshape(total, c, t, v, m)
    off += total * frame_size * 4
    labels = np.frombuffer(blob, dtype="<i4", count=total, offset=off)
    samples = [SkeletonSample(coords=coords[i].copy(), label=int(labels[i]))
               for i in range(total)]
    edges: list[tuple[int, int]] = []
    root = 0
    with open(path + ".edges", "r", encoding="utf-8") as fh:
        for line in fh:
            match = re.match(r"#\s*root\s+(\d+)", line.strip())
            if match:
                root = int(match.group(1))
                continue
            stripped = line.split("#", 1)[0].strip()
            if stripped:
                i, j = stripped.split()
                edges.append((int(i), int(j)))
    return DatasetSplit(
        train=samples[:n_train],
        validation=samples[n_train : n_train + n_val],
        test=samples[n_train + n_val :],
        classes=classes,
        edges=tuple(edges),
        root=root,
    )


# -- batching, training, evaluation --


def _batches(samples: list[SkeletonSample], batch_size: int, order=None):
    if order is None:
        order = np.arange(len(samples))
    for start in range(0, len(order), batch_size):
        chunk = order[start : start + batch_size]
        x = np.stack([samples[i].coords for i in chunk])
        y = np.asarray([samples[i].label for i in chunk], dtype=np.int64)
        yield x, y


def train_epoch(net, samples: list[SkeletonSample], optimizer, batch_size: int,
                rng: np.random.Generator, alpha=None, mode: str = "continuous",
                sample_rng: np.random.Generator | None = None) -> float:
    """One pass of minibatch SGD; returns the sample-mean loss."""
    if not samples:
        raise DataError("cannot train on an empty split")
    net.set_training(True)
    order = rng.permutation(len(samples))
    total = 0.0
    for x, y in _batches(samples, batch_size, order):
        logits = net.forward(x, alpha=alpha, mode=mode, rng=sample_rng)
        loss = ops.cross_entropy(logits, y)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        total += float(loss.data) * len(y)
    return total / len(samples)


def predict_logits(net, samples: list[SkeletonSample], batch_size: int = 32,
                   alpha=None, mode: str = "continuous",
                   rng: np.random.Generator | None = None) -> np.ndarray:
    if not samples:
        raise DataError("cannot evaluate an empty split")
    net.set_training(False)
    outputs = []
    for x, _ in _batches(samples, batch_size):
        outputs.append(net.forward(x, alpha=alpha, mode=mode, rng=rng).data)
    return np.concatenate(outputs, axis=0)


def topk_accuracies(logits: np.ndarray, labels: np.ndarray, k_list=(1, 5)) -> dict[int, float]:
    """Top-k hit rates; ranking ties resolve to the lower class index."""
    classes = logits.shape[1]
    for k in k_list:
        if not 1 <= k <= classes:
            raise ArgumentError(f"top-{k} undefined for {classes} classes")
    ranking = np.argsort(-logits, axis=1, kind="stable")
    out = {}
    for k in k_list:
        hits = (ranking[:, :k] == labels[:, None]).any(axis=1)
        out[k] = float(hits.mean())
    return out


def evaluate(net, samples: list[SkeletonSample], k_list=(1, 5), batch_size: int = 32,
             alpha=None, mode: str = "continuous",
             rng: np.random.Generator | None = None) -> dict[int, float]:
    logits = predict_logits(net, samples, batch_size=batch_size, alpha=alpha,
                            mode=mode, rng=rng)
    labels = np.asarray([s.label for s in samples], dtype=np.int64)
    return topk_accuracies(logits, labels, k_list)


def mean_loss(net, samples: list[SkeletonSample], batch_size: int = 32,
              alpha=None, mode: str = "continuous",
              rng: np.random.Generator | None = None) -> float:
    logits = predict_logits(net, samples, batch_size=batch_size, alpha=alpha,
                            mode=mode, rng=rng)
    labels = np.asarray([s.label for s in samples], dtype=np.int64)
    return float(ops.cross_entropy(Tensor(logits), labels).data)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def fuse_scores(logits_a: np.ndarray, logits_b: np.ndarray) -> np.ndarray:
    """Elementwise sum of the two streams' softmax scores."""
    if logits_a.shape != logits_b.shape:
        raise StructuralError(f"stream shapes differ: {logits_a.shape} vs {logits_b.shape}")
    return _softmax(logits_a) + _softmax(logits_b)


def score_fusion(logits_a: np.ndarray, logits_b: np.ndarray) -> np.ndarray:
    """Fused class predictions: argmax of the summed softmax scores."""
    return np.argmax(fuse_scores(logits_a, logits_b), axis=1)
