"""Static skeleton graphs and their spectral machinery.

Conventions used throughout:

- adjacency matrices are dense ``(n, n)`` float64 arrays, symmetric with a
  zero diagonal before any self-loop augmentation;
- the propagation Laplacian is ``I + D^{-1/2} A D^{-1/2}`` (self-loop
  variant); the subtractive ``I - D^{-1/2} A D^{-1/2}`` form exists only to
  feed the spectral-domain test oracle;
- isolated nodes use the convention ``D_ii^{-1/2} := 0``, so they keep the
  bare identity contribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, NumericalError, ParseError, StructuralError

MAX_CHEBYSHEV_ORDER = 4
DEFAULT_LAMBDA_MAX = 2.0

#: largest node count accepted by the eigendecomposition oracle
ORACLE_MAX_NODES = 64


@dataclass(frozen=True)
class SkeletonPreset:
    """A named skeleton topology: undirected bone list plus a root joint."""

    name: str
    num_joints: int
    edges: tuple[tuple[int, int], ...]
    root: int

    def adjacency(self) -> np.ndarray:
        return build_skeleton_adjacency(self.edges, self.num_joints)


# 25-joint skeleton tree (24 bones), rooted at the upper-spine joint.
NTU_25 = SkeletonPreset(
    name="ntu25",
    num_joints=25,
    edges=(
        (0, 1), (1, 20), (2, 20), (3, 2), (4, 20), (5, 4), (6, 5), (7, 6),
        (8, 20), (9, 8), (10, 9), (11, 10), (12, 0), (13, 12), (14, 13),
        (15, 14), (16, 0), (17, 16), (18, 17), (19, 18), (21, 22), (22, 7),
        (23, 24), (24, 11),
    ),
    root=20,
)

# Five joints in a chain, rooted at the middle so the two ends act as arms.
CHAIN_5 = SkeletonPreset(
    name="chain5",
    num_joints=5,
    edges=((0, 1), (1, 2), (2, 3), (3, 4)),
    root=2,
)

PRESETS = {p.name: p for p in (NTU_25, CHAIN_5)}


def build_skeleton_adjacency(edges, n: int) -> np.ndarray:
    """Symmetric 0/1 adjacency for an undirected edge list on ``n`` nodes.

    Duplicate edges are idempotent; self-edges and out-of-range endpoints
    are rejected.
    """
    if n <= 0:
        raise StructuralError(f"node count must be positive, got {n}")
    adj = np.zeros((n, n), dtype=np.float64)
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise StructuralError(f"edge ({i}, {j}) out of range for n={n}")
        if i == j:
            raise StructuralError(f"self-edge ({i}, {j}) not allowed")
        adj[i, j] = 1.0
        adj[j, i] = 1.0
    return adj


def read_edge_list(path, n: int | None = None) -> np.ndarray:
    """Adjacency from a plain-text edge list (one ``i j`` pair per line).

    Blank lines and ``#`` comments are skipped. When ``n`` is omitted it is
    inferred as ``max endpoint + 1``.
    """
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 'i j', got {raw.strip()!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-integer endpoint") from exc
    if n is None:
        if not edges:
            raise ParseError(f"{path}: empty edge list and no node count given")
        n = max(max(e) for e in edges) + 1
    return build_skeleton_adjacency(edges, n)


def write_edge_list(path, edges) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in edges:
            fh.write(f"{i} {j}\n")


def _d_inv_sqrt(adj: np.ndarray) -> np.ndarray:
    degree = adj.sum(axis=1)
    with np.errstate(divide="ignore"):
        inv = 1.0 / np.sqrt(degree)
    inv[degree == 0.0] = 0.0
    return inv


def laplacian_paper(adj: np.ndarray) -> np.ndarray:
    """Self-loop propagation matrix ``I + D^{-1/2} A D^{-1/2}``."""
    adj = np.asarray(adj, dtype=np.float64)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise StructuralError(f"adjacency must be square, got {adj.shape}")
    if (adj < 0).any():
        raise ArgumentError("adjacency entries must be nonnegative")
    inv = _d_inv_sqrt(adj)
    return np.eye(adj.shape[0]) + inv[:, None] * adj * inv[None, :]


def laplacian_standard(adj: np.ndarray) -> np.ndarray:
    """Symmetric normalized Laplacian ``I - D^{-1/2} A D^{-1/2}``.

    Only the spectral oracle consumes this form.
    """
    adj = np.asarray(adj, dtype=np.float64)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise StructuralError(f"adjacency must be square, got {adj.shape}")
    if (adj < 0).any():
        raise ArgumentError("adjacency entries must be nonnegative")
    inv = _d_inv_sqrt(adj)
    return np.eye(adj.shape[0]) - inv[:, None] * adj * inv[None, :]


def rescale(lap: np.ndarray, lambda_max: float = DEFAULT_LAMBDA_MAX) -> np.ndarray:
    """Map the spectrum into [-1, 1]: ``2 L / lambda_max - I``."""
    if not lambda_max > 0:
        raise ArgumentError(f"lambda_max must be positive, got {lambda_max}")
    lap = np.asarray(lap, dtype=np.float64)
    return 2.0 * lap / lambda_max - np.eye(lap.shape[0])


def estimate_lambda_max(lap: np.ndarray, iters: int = 100) -> float:
    """Power-iteration estimate of the largest eigenvalue magnitude.

    Deterministic (fixed start vector); good enough to replace the fixed
    lambda_max = 2 convention when a config asks for it.
    """
    lap = np.asarray(lap, dtype=np.float64)
    n = lap.shape[0]
    v = np.ones(n) / np.sqrt(n)
    lam = 0.0
    for _ in range(iters):
        w = lap @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam = float(v @ lap @ v)
    return abs(lam)


def chebyshev_terms(lap_scaled: np.ndarray, order: int) -> list[np.ndarray]:
    """Matrices ``[T_0, ..., T_order]`` of the Chebyshev recursion.

    ``T_0 = I``, ``T_1 = Lhat``, ``T_r = 2 Lhat T_{r-1} - T_{r-2}``.
    """
    if not 0 <= order <= MAX_CHEBYSHEV_ORDER:
        raise ArgumentError(
            f"order must lie in [0, {MAX_CHEBYSHEV_ORDER}], got {order}"
        )
    lap_scaled = np.asarray(lap_scaled, dtype=np.float64)
    n = lap_scaled.shape[0]
    terms = [np.eye(n)]
    if order >= 1:
        terms.append(lap_scaled.copy())
    for _ in range(2, order + 1):
        terms.append(2.0 * lap_scaled @ terms[-1] - terms[-2])
    return terms


def spectral_filter_oracle(
    lap: np.ndarray,
    coeffs,
    x: np.ndarray,
    lambda_max: float = DEFAULT_LAMBDA_MAX,
) -> np.ndarray:
    """Filter ``x`` through ``U g(Lambda) U^T`` (eigendecomposition route).

    ``g(lam) = sum_r coeffs[r] * T_r(lamhat)`` with ``lamhat`` the
    eigenvalue mapped by ``2 lam / lambda_max - 1``. Reference path for the
    equivalence tests against the matrix recursion; small graphs only.
    """
    lap = np.asarray(lap, dtype=np.float64)
    n = lap.shape[0]
    if n > ORACLE_MAX_NODES:
        raise ArgumentError(f"oracle limited to n <= {ORACLE_MAX_NODES}, got {n}")
    if not lambda_max > 0:
        raise ArgumentError(f"lambda_max must be positive, got {lambda_max}")
    if not np.allclose(lap, lap.T, atol=1e-10):
        raise ArgumentError("oracle requires a symmetric matrix")
    try:
        eigvals, eigvecs = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    lam_hat = 2.0 * eigvals / lambda_max - 1.0
    t_prev = np.ones_like(lam_hat)
    t_cur = lam_hat.copy()
    g = coeffs[0] * t_prev
    if len(coeffs) > 1:
        g = g + coeffs[1] * t_cur
    for r in range(2, len(coeffs)):
        t_prev, t_cur = t_cur, 2.0 * lam_hat * t_cur - t_prev
        g = g + coeffs[r] * t_cur
    return eigvecs @ (g[:, None] * (eigvecs.T @ np.asarray(x, dtype=np.float64)))


def row_normalize(mat: np.ndarray) -> np.ndarray:
    """L1-normalize each row; all-zero rows become uniform ``1/n``."""
    mat = np.asarray(mat, dtype=np.float64)
    if (mat < 0).any():
        raise ArgumentError("row_normalize expects nonnegative entries")
    sums = mat.sum(axis=1, keepdims=True)
    n = mat.shape[1]
    out = np.where(sums > 0.0, mat / np.where(sums == 0.0, 1.0, sums), 1.0 / n)
    return out
