"""Searchable network of stacked GCN blocks.

A block mixes the eight graph modules into one propagation matrix,
projects channels, and runs a temporal convolution unit; the network
stacks ``K`` blocks over a fixed skeleton and ends in global average
pooling plus a linear classifier. The same class serves three roles:

- supernet (``selection=None``): all modules live in parallel, mixed by
  architecture weights (continuous) or one sampled module per block;
- finalized network (``selection`` given): each block sums its selected
  modules unweighted, optionally plus a freely learnable complementary
  graph per block;
- fixed baselines: any hand-written selection.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import ops
from .errors import ArgumentError, ParseError, StructuralError
from .modules import (
    DYNAMIC_KINDS,
    LABEL_TO_KIND,
    MODULE_LABELS,
    NUM_MODULES,
    STATIC_KINDS,
    CorrelationParams,
    ModuleKind,
    dynamic_module,
    init_correlation_params,
    static_module_matrices,
)
from .rng import spawn_rng
from .tensor import Parameter, Tensor

#: positivity floor the search applies to raw Gaussian samples before
#: they reach the network (keeps the mixing ratio well-defined)
SEARCH_ALPHA_FLOOR = 1e-6

#: selection threshold on normalized per-layer weights
DERIVE_THRESHOLD = 0.1

# display order of the architecture table export
TABLE_COLUMNS = (
    ModuleKind.L, ModuleKind.L4N, ModuleKind.L4, ModuleKind.L3,
    ModuleKind.L2, ModuleKind.SPATIAL, ModuleKind.TEMPORAL,
    ModuleKind.SPATIOTEMPORAL,
)


@dataclass(frozen=True)
class SupernetConfig:
    blocks: int
    channels: tuple[int, ...]
    strides: tuple[int, ...]
    in_channels: int
    num_joints: int
    frames: int
    classes: int
    temporal_kernel: int = 9
    embed_ratio: int = 4
    bn_momentum: float = 0.1
    max_bodies: int = 2

    def __post_init__(self):
        if len(self.channels) != self.blocks:
            raise ArgumentError(
                f"channel plan length {len(self.channels)} != blocks {self.blocks}"
            )
        if len(self.strides) != self.blocks:
            raise ArgumentError(
                f"stride plan length {len(self.strides)} != blocks {self.blocks}"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["strides"] = list(self.strides)
        return d

    @staticmethod
    def from_dict(d: dict) -> "SupernetConfig":
        d = dict(d)
        d["channels"] = tuple(d["channels"])
        d["strides"] = tuple(d["strides"])
        return SupernetConfig(**d)


def desk_config(**overrides) -> SupernetConfig:
    """Small preset every test runs on: 4 blocks on the 5-joint chain."""
    cfg = SupernetConfig(
        blocks=4,
        channels=(16, 16, 32, 32),
        strides=(1, 1, 1, 1),
        in_channels=2,
        num_joints=5,
        frames=32,
        classes=3,
    )
    return replace(cfg, **overrides) if overrides else cfg


def full_config(**overrides) -> SupernetConfig:
    """The 10-block plan sized for 25-joint skeleton data."""
    cfg = SupernetConfig(
        blocks=10,
        channels=(64, 64, 64, 64, 128, 128, 128, 256, 256, 256),
        strides=(1, 1, 1, 1, 2, 1, 1, 2, 1, 1),
        in_channels=3,
        num_joints=25,
        frames=300,
        classes=60,
    )
    return replace(cfg, **overrides) if overrides else cfg


def normalized_weights(alpha_row) -> np.ndarray:
    """Map one layer's raw architecture values to mixture weights.

    Negative entries contribute nothing; the remainder is normalized to
    sum to one. An all-nonpositive row has no usable mixture.
    """
    a = np.asarray(alpha_row, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ArgumentError("architecture weights must be finite")
    w = np.maximum(a, 0.0)
    total = w.sum()
    if not total > 0.0:
        raise ArgumentError("degenerate architecture weights: nonpositive everywhere")
    return w / total


def sample_module_index(alpha_row, rng: np.random.Generator) -> int:
    """Draw one module index with probability proportional to the mapped
    weights. Zero-weight modules are never drawn."""
    a = np.asarray(alpha_row, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ArgumentError("architecture weights must be finite")
    cum = np.cumsum(np.maximum(a, 0.0))
    if not cum[-1] > 0.0:
        raise ArgumentError("degenerate architecture weights: nonpositive everywhere")
    idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    idx = min(idx, len(cum) - 1)
    while idx > 0 and cum[idx] == cum[idx - 1]:
        idx -= 1
    return idx


def clamp_search_alpha(alpha: np.ndarray) -> np.ndarray:
    """Positivity clamp applied to raw search samples before network use."""
    return np.maximum(np.asarray(alpha, dtype=np.float64), SEARCH_ALPHA_FLOOR)


class GcnBlock:
    """One graph-propagation + temporal-convolution unit.

    Layout: mixed propagation -> channel projection -> batchnorm ->
    residual (1x1-projected when channels change) -> relu -> temporal
    conv -> batchnorm -> residual (1x1-projected with stride when the
    unit downsamples) -> relu. The bare graph stage is exposed separately
    for the mixing-linearity and identity checks.
    """

    def __init__(self, in_channels: int, out_channels: int, stride: int,
                 static_mats: dict[ModuleKind, np.ndarray],
                 rng: np.random.Generator,
                 active=tuple(ModuleKind),
                 complementary: bool = False,
                 temporal_kernel: int = 9,
                 embed_ratio: int = 4,
                 bn_momentum: float = 0.1,
                 batchnorm: bool = True,
                 residual: bool = True,
                 bias: bool = True,
                 activation: bool = True,
                 dtype=np.float32,
                 name: str = "block"):
        if stride not in (1, 2):
            raise ArgumentError(f"temporal stride must be 1 or 2, got {stride}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        self.active = tuple(ModuleKind(k) for k in active)
        self.activation = activation
        self.residual = residual
        self.name = name
        num_joints = next(iter(static_mats.values())).shape[0]
        self.static_mats = {
            k: static_mats[k].astype(dtype) for k in self.active if k in STATIC_KINDS
        }
        self.correlations: dict[ModuleKind, CorrelationParams] = {}
        for kind in self.active:
            if kind in DYNAMIC_KINDS:
                self.correlations[kind] = init_correlation_params(
                    kind, in_channels, rng, embed_ratio=embed_ratio,
                    temporal_kernel=temporal_kernel, dtype=dtype,
                    name=f"{name}.{MODULE_LABELS[kind]}",
                )

        def conv_param(tag, shape):
            fan_in = int(np.prod(shape[1:]))
            bound = 1.0 / np.sqrt(fan_in)
            return Parameter(rng.uniform(-bound, bound, shape).astype(dtype),
                             name=f"{name}.{tag}")

        self.theta = conv_param("theta", (out_channels, in_channels, 1, 1))
        self.theta_bias = (
            Parameter(np.zeros(out_channels, dtype=dtype), name=f"{name}.theta_bias",
                      decay=False)
            if bias else None
        )
        self.bn1 = ops.BatchNorm(out_channels, momentum=bn_momentum, dtype=dtype,
                                 name=f"{name}.bn1") if batchnorm else None
        self.res_proj = (
            conv_param("res_proj", (out_channels, in_channels, 1, 1))
            if residual and in_channels != out_channels else None
        )
        self.tcn_w = conv_param("tcn", (out_channels, out_channels, temporal_kernel, 1))
        self.tcn_bias = (
            Parameter(np.zeros(out_channels, dtype=dtype), name=f"{name}.tcn_bias",
                      decay=False)
            if bias else None
        )
        self.bn2 = ops.BatchNorm(out_channels, momentum=bn_momentum, dtype=dtype,
                                 name=f"{name}.bn2") if batchnorm else None
        self.tcn_res_proj = (
            conv_param("tcn_res_proj", (out_channels, out_channels, 1, 1))
            if residual and stride != 1 else None
        )
        self.complementary = (
            Parameter(np.zeros((num_joints, num_joints), dtype=dtype),
                      name=f"{name}.complementary", decay=False)
            if complementary else None
        )

    def module_matrix(self, h: Tensor, kind: ModuleKind):
        """Propagation matrix of one module: (V, V) constant for the
        static ones, (N, V, V) tensor for the dynamic ones."""
        if kind in STATIC_KINDS:
            return self.static_mats[kind]
        return dynamic_module(h, self.correlations[kind])

    def propagation(self, h: Tensor, weights=None):
        """Weighted (or plain when ``weights`` is None) sum of the active
        modules' matrices, plus the complementary graph if present."""
        static_acc = None
        terms = []
        for kind in self.active:
            w = 1.0 if weights is None else float(weights[kind])
            if w == 0.0:
                continue
            if kind in STATIC_KINDS:
                mat = self.static_mats[kind] if w == 1.0 else w * self.static_mats[kind]
                static_acc = mat if static_acc is None else static_acc + mat
            else:
                mod = dynamic_module(h, self.correlations[kind])
                terms.append(mod if w == 1.0 else ops.mul(mod, w))
        if not terms and self.complementary is None:
            if static_acc is None:
                raise ArgumentError("no module contributes to the propagation")
            return static_acc
        acc = None if static_acc is None else Tensor(static_acc)
        for t in terms:
            acc = t if acc is None else ops.add(acc, t)
        if self.complementary is not None:
            acc = self.complementary if acc is None else ops.add(acc, self.complementary)
        return acc

    def graph_stage(self, h: Tensor, adj) -> Tensor:
        """Propagate joint features and project channels (no furniture)."""
        z = ops.graph_propagate(h, adj)
        return ops.conv_pointwise(z, self.theta, self.theta_bias)

    def forward(self, h: Tensor, weights=None, sampled: ModuleKind | None = None) -> Tensor:
        adj = self.module_matrix(h, sampled) if sampled is not None else self.propagation(h, weights)
        z = self.graph_stage(h, adj)
        if self.bn1 is not None:
            z = self.bn1(z)
        if self.residual:
            res = h if self.res_proj is None else ops.conv_pointwise(h, self.res_proj)
            z = ops.add(z, res)
        if self.activation:
            z = ops.relu(z)
        y = ops.conv_temporal(z, self.tcn_w, self.tcn_bias, stride=self.stride)
        if self.bn2 is not None:
            y = self.bn2(y)
        if self.residual:
            res = z if self.tcn_res_proj is None else ops.pointwise_strided(z, self.tcn_res_proj, self.stride)
            y = ops.add(y, res)
        if self.activation:
            y = ops.relu(y)
        return y

    def parameters(self) -> list[Parameter]:
        params = [self.theta]
        if self.theta_bias is not None:
            params.append(self.theta_bias)
        if self.res_proj is not None:
            params.append(self.res_proj)
        params.append(self.tcn_w)
        if self.tcn_bias is not None:
            params.append(self.tcn_bias)
        if self.tcn_res_proj is not None:
            params.append(self.tcn_res_proj)
        for kind in sorted(self.correlations):
            params.extend(self.correlations[kind].parameters())
        if self.complementary is not None:
            params.append(self.complementary)
        for bn in (self.bn1, self.bn2):
            if bn is not None:
                params.extend(bn.parameters())
        return params

    def batchnorms(self):
        return [bn for bn in (self.bn1, self.bn2) if bn is not None]


class Network:
    """K GCN blocks over a fixed skeleton plus a linear classifier."""

    def __init__(self, config: SupernetConfig, adjacency: np.ndarray,
                 seed: int = 0, selection=None, complementary: bool = False,
                 dtype=np.float32):
        if adjacency.shape != (config.num_joints, config.num_joints):
            raise StructuralError(
                f"adjacency {adjacency.shape} vs num_joints {config.num_joints}"
            )
        self.config = config
        self.adjacency = np.asarray(adjacency, dtype=np.float64)
        self.selection = (
            None if selection is None
            else [tuple(ModuleKind(k) for k in layer) for layer in selection]
        )
        if self.selection is not None and len(self.selection) != config.blocks:
            raise StructuralError(
                f"selection covers {len(self.selection)} layers, network has {config.blocks}"
            )
        static_mats = static_module_matrices(self.adjacency)
        rng = spawn_rng(seed, "net-init")
        self.blocks: list[GcnBlock] = []
        in_ch = config.in_channels
        for k in range(config.blocks):
            active = tuple(ModuleKind) if self.selection is None else self.selection[k]
            self.blocks.append(GcnBlock(
                in_ch, config.channels[k], config.strides[k], static_mats, rng,
                active=active, complementary=complementary,
                temporal_kernel=config.temporal_kernel,
                embed_ratio=config.embed_ratio, bn_momentum=config.bn_momentum,
                dtype=dtype, name=f"block{k}",
            ))
            in_ch = config.channels[k]
        bound = 1.0 / np.sqrt(in_ch)
        self.fc_w = Parameter(
            rng.uniform(-bound, bound, (in_ch, config.classes)).astype(dtype), name="fc.w"
        )
        self.fc_b = Parameter(np.zeros(config.classes, dtype=dtype), name="fc.b", decay=False)
        self.training = True

    # -- mode switches --

    def set_training(self, flag: bool) -> None:
        self.training = flag
        for block in self.blocks:
            for bn in block.batchnorms():
                bn.training = flag

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = []
        for block in self.blocks:
            params.extend(block.parameters())
        params.extend([self.fc_w, self.fc_b])
        return params

    def num_parameters(self) -> int:
        return int(sum(p.data.size for p in self.parameters()))

    # -- forward --

    def _fold_bodies(self, x: np.ndarray) -> tuple[np.ndarray, int, int]:
        if x.ndim != 5:
            raise StructuralError(f"input must be (N, C, T, V, M), got {x.shape}")
        n, c, t, v, m = x.shape
        if c != self.config.in_channels:
            raise StructuralError(f"input channels {c} != {self.config.in_channels}")
        if v != self.config.num_joints:
            raise StructuralError(f"input joints {v} != {self.config.num_joints}")
        folded = np.ascontiguousarray(x.transpose(0, 4, 1, 2, 3)).reshape(n * m, c, t, v)
        return folded, n, m

    def forward(self, x: np.ndarray, alpha: np.ndarray | None = None,
                mode: str = "continuous", rng: np.random.Generator | None = None) -> Tensor:
        """Logits (N, classes) for a batch (N, C, T, V, M).

        ``alpha`` is the (K, 8) architecture matrix; required for the
        supernet, ignored by fixed-selection networks. Sampled mode
        activates one module per block drawn from the mapped weights.
        """
        folded, n, m = self._fold_bodies(np.asarray(x))
        h = Tensor(folded)
        if self.selection is None:
            if alpha is None:
                raise ArgumentError("supernet forward requires architecture weights")
            alpha = np.asarray(alpha, dtype=np.float64)
            if alpha.shape != (self.config.blocks, NUM_MODULES):
                raise StructuralError(
                    f"alpha shape {alpha.shape} != ({self.config.blocks}, {NUM_MODULES})"
                )
            if mode == "continuous":
                for k, block in enumerate(self.blocks):
                    h = block.forward(h, weights=normalized_weights(alpha[k]))
            elif mode == "sampled":
                if rng is None:
                    raise ArgumentError("sampled mode requires an rng")
                for k, block in enumerate(self.blocks):
                    kind = ModuleKind(sample_module_index(alpha[k], rng))
                    h = block.forward(h, sampled=kind)
            else:
                raise ArgumentError(f"unknown mode {mode!r}")
        else:
            for block in self.blocks:
                h = block.forward(h)
        pooled = ops.global_avg_pool(h)
        logits = ops.linear(pooled, self.fc_w, self.fc_b)
        per_body = ops.reshape(logits, (n, m, self.config.classes))
        return ops.mean_axis(per_body, axis=1)

    # -- persistence --

    def state_entries(self) -> dict[str, np.ndarray]:
        entries = {f"param.{p.name}": p.data for p in self.parameters()}
        for block in self.blocks:
            for tag, bn in (("bn1", block.bn1), ("bn2", block.bn2)):
                if bn is None:
                    continue
                entries[f"state.{block.name}.{tag}.running_mean"] = bn.running_mean
                entries[f"state.{block.name}.{tag}.running_var"] = bn.running_var
        return entries

    def load_state_entries(self, entries: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            key = f"param.{p.name}"
            if key not in entries:
                raise ParseError(f"checkpoint missing parameter {p.name!r}")
            arr = np.asarray(entries[key])
            if arr.shape != p.data.shape:
                raise StructuralError(
                    f"checkpoint entry {p.name!r} has shape {arr.shape}, expected {p.data.shape}"
                )
            p.data = arr.astype(p.data.dtype).copy()
        for block in self.blocks:
            for tag, bn in (("bn1", block.bn1), ("bn2", block.bn2)):
                if bn is None:
                    continue
                mean_key = f"state.{block.name}.{tag}.running_mean"
                var_key = f"state.{block.name}.{tag}.running_var"
                if mean_key in entries:
                    bn.load_state({"running_mean": entries[mean_key],
                                   "running_var": entries[var_key]})


# -- architecture derivation and export --


def derive_architecture(alpha: np.ndarray, threshold: float = DERIVE_THRESHOLD) -> list[tuple[ModuleKind, ...]]:
    """Per-layer module selection: normalized weight above ``threshold``.

    A layer whose weights all fall below the threshold keeps its single
    strongest module.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.ndim != 2 or alpha.shape[1] != NUM_MODULES:
        raise StructuralError(f"alpha must be (K, {NUM_MODULES}), got {alpha.shape}")
    if not np.all(np.isfinite(alpha)):
        raise ArgumentError("alpha must be finite")
    selection = []
    for row in alpha:
        w = normalized_weights(clamp_search_alpha(row))
        picked = tuple(ModuleKind(i) for i in range(NUM_MODULES) if w[i] > threshold)
        if not picked:
            picked = (ModuleKind(int(np.argmax(w))),)
        selection.append(picked)
    return selection


def architecture_table(selection) -> str:
    """Plain-text check-mark table: rows are layers, columns the modules."""
    header = ["M"] + [MODULE_LABELS[k] for k in TABLE_COLUMNS]
    rows = [header]
    for i, layer in enumerate(selection, start=1):
        chosen = set(ModuleKind(k) for k in layer)
        rows.append([f"K{i}"] + ["x" if k in chosen else "." for k in TABLE_COLUMNS])
    widths = [max(len(row[c]) for row in rows) for c in range(len(header))]
    lines = []
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def architecture_to_json(selection, config: SupernetConfig,
                         complementary: bool = True,
                         threshold: float = DERIVE_THRESHOLD) -> str:
    doc = {
        "selection": [[MODULE_LABELS[ModuleKind(k)] for k in layer] for layer in selection],
        "net": config.to_dict(),
        "complementary": complementary,
        "threshold": threshold,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def architecture_from_json(text: str) -> tuple[list[tuple[ModuleKind, ...]], SupernetConfig, bool]:
    try:
        doc = json.loads(text)
        selection = [tuple(LABEL_TO_KIND[label] for label in layer)
                     for layer in doc["selection"]]
        config = SupernetConfig.from_dict(doc["net"])
        complementary = bool(doc.get("complementary", True))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid architecture document: {exc}") from exc
    return selection, config, complementary


def finalize_network(selection, config: SupernetConfig, adjacency: np.ndarray,
                     seed: int = 0, complementary: bool = True) -> Network:
    """Fixed-architecture network from a derived selection.

    Selected module matrices are summed without architecture weights;
    each layer optionally gains a zero-initialized learnable graph, so
    the initial forward equals the plain selected-module network.
    """
    return Network(config, adjacency, seed=seed, selection=selection,
                   complementary=complementary)
