"""The eight per-layer graph generators.

Five are static functions of the fixed skeleton graph (the propagation
Laplacian itself plus polynomial terms of orders 2-4 and a row-normalized
order-4), three are dynamic: they score pairwise joint similarity from
the layer's hidden representation and row-softmax the scores into a
propagation matrix, using pointwise embeddings, temporal embeddings, or
their composition.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import graph, ops
from .errors import ArgumentError, StructuralError
from .tensor import Parameter, Tensor


class ModuleKind(IntEnum):
    """Fixed ordering; architecture-parameter columns index by value."""

    L = 0
    L2 = 1
    L3 = 2
    L4 = 3
    L4N = 4
    SPATIAL = 5
    TEMPORAL = 6
    SPATIOTEMPORAL = 7


NUM_MODULES = len(ModuleKind)

MODULE_LABELS = {
    ModuleKind.L: "L",
    ModuleKind.L2: "L2",
    ModuleKind.L3: "L3",
    ModuleKind.L4: "L4",
    ModuleKind.L4N: "L4n",
    ModuleKind.SPATIAL: "M(S)",
    ModuleKind.TEMPORAL: "M(T)",
    ModuleKind.SPATIOTEMPORAL: "M(ST)",
}
LABEL_TO_KIND = {v: k for k, v in MODULE_LABELS.items()}

STATIC_KINDS = (ModuleKind.L, ModuleKind.L2, ModuleKind.L3, ModuleKind.L4, ModuleKind.L4N)
DYNAMIC_KINDS = (ModuleKind.SPATIAL, ModuleKind.TEMPORAL, ModuleKind.SPATIOTEMPORAL)


def static_module_matrices(adjacency: np.ndarray,
                           lambda_max: float = graph.DEFAULT_LAMBDA_MAX) -> dict[ModuleKind, np.ndarray]:
    """Precompute the five static propagation matrices for a skeleton.

    The order-1 module is the self-loop Laplacian itself; higher orders
    come from the polynomial recursion on its rescaled form; the
    normalized order-4 takes entrywise magnitudes then L1 rows.
    """
    lap = graph.laplacian_paper(adjacency)
    terms = graph.chebyshev_terms(graph.rescale(lap, lambda_max), graph.MAX_CHEBYSHEV_ORDER)
    return {
        ModuleKind.L: lap,
        ModuleKind.L2: terms[2],
        ModuleKind.L3: terms[3],
        ModuleKind.L4: terms[4],
        ModuleKind.L4N: graph.row_normalize(np.abs(terms[4])),
    }


def chebyshev_module(kind: ModuleKind, matrices: dict[ModuleKind, np.ndarray]) -> np.ndarray:
    if kind not in STATIC_KINDS:
        raise ArgumentError(f"{kind!r} is not a static module")
    return matrices[kind]


def default_embed_channels(channels: int, ratio: int = 4) -> int:
    return max(1, channels // ratio)


@dataclass
class CorrelationParams:
    """Projection weights for one dynamic module.

    ``phi``/``psi`` hold one kernel for the single-stage modules and the
    (pointwise, temporal) pair for the composed module. Kernels span
    (C_e, C, 1, 1) for pointwise and (C_e, C_in, k, 1) for temporal.
    """

    kind: ModuleKind
    phi: tuple[Parameter, ...]
    psi: tuple[Parameter, ...]
    embed_channels: int

    def parameters(self) -> list[Parameter]:
        return [*self.phi, *self.psi]


def _fan_in_uniform(rng: np.random.Generator, shape, dtype) -> np.ndarray:
    fan_in = int(np.prod(shape[1:]))
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_correlation_params(kind: ModuleKind, channels: int, rng: np.random.Generator,
                            embed_ratio: int = 4, temporal_kernel: int = 9,
                            dtype=np.float32, name: str = "") -> CorrelationParams:
    ce = default_embed_channels(channels, embed_ratio)
    if ce > channels:
        raise ArgumentError(f"embed_channels {ce} exceeds channels {channels}")

    def make(tag: str, shape) -> Parameter:
        return Parameter(_fan_in_uniform(rng, shape, dtype), name=f"{name}.{tag}")

    if kind == ModuleKind.SPATIAL:
        phi = (make("phi_s", (ce, channels, 1, 1)),)
        psi = (make("psi_s", (ce, channels, 1, 1)),)
    elif kind == ModuleKind.TEMPORAL:
        phi = (make("phi_t", (ce, channels, temporal_kernel, 1)),)
        psi = (make("psi_t", (ce, channels, temporal_kernel, 1)),)
    elif kind == ModuleKind.SPATIOTEMPORAL:
        phi = (make("phi_s", (ce, channels, 1, 1)), make("phi_t", (ce, ce, temporal_kernel, 1)))
        psi = (make("psi_s", (ce, channels, 1, 1)), make("psi_t", (ce, ce, temporal_kernel, 1)))
    else:
        raise ArgumentError(f"{kind!r} is not a dynamic module")
    return CorrelationParams(kind=kind, phi=phi, psi=psi, embed_channels=ce)


def _scores_to_graph(phi: Tensor, psi: Tensor) -> Tensor:
    return ops.softmax_lastdim(ops.pairwise_scores(phi, psi))


def spatial_correlation(h: Tensor, params: CorrelationParams) -> Tensor:
    """Row-stochastic (N, V, V) graph from pointwise joint embeddings."""
    if params.kind != ModuleKind.SPATIAL:
        raise ArgumentError(f"params built for {params.kind!r}")
    phi = ops.conv_pointwise(h, params.phi[0])
    psi = ops.conv_pointwise(h, params.psi[0])
    return _scores_to_graph(phi, psi)


def temporal_correlation(h: Tensor, params: CorrelationParams) -> Tensor:
    """As spatial, but each embedding aggregates a temporal neighborhood
    first, so the scores can pick up cross-frame joint interactions."""
    if params.kind != ModuleKind.TEMPORAL:
        raise ArgumentError(f"params built for {params.kind!r}")
    phi = ops.conv_temporal(h, params.phi[0])
    psi = ops.conv_temporal(h, params.psi[0])
    return _scores_to_graph(phi, psi)


def spatiotemporal_correlation(h: Tensor, params: CorrelationParams) -> Tensor:
    """Pointwise projection followed by temporal aggregation, then scores."""
    if params.kind != ModuleKind.SPATIOTEMPORAL:
        raise ArgumentError(f"params built for {params.kind!r}")
    phi = ops.conv_temporal(ops.conv_pointwise(h, params.phi[0]), params.phi[1])
    psi = ops.conv_temporal(ops.conv_pointwise(h, params.psi[0]), params.psi[1])
    return _scores_to_graph(phi, psi)


_DYNAMIC_FNS = {
    ModuleKind.SPATIAL: spatial_correlation,
    ModuleKind.TEMPORAL: temporal_correlation,
    ModuleKind.SPATIOTEMPORAL: spatiotemporal_correlation,
}


def dynamic_module(h: Tensor, params: CorrelationParams) -> Tensor:
    if h.ndim != 4:
        raise StructuralError(f"hidden state must be (N, C, T, V), got {h.shape}")
    return _DYNAMIC_FNS[params.kind](h, params)
