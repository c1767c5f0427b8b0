"""Central finite-difference gradient checking used across the test suite."""

import numpy as np

from gcnnas.tensor import Tensor


def numerical_grad(loss_fn, target: Tensor, eps: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of ``loss_fn()`` w.r.t. ``target.data``.

    ``loss_fn`` must recompute the scalar loss from current tensor
    contents; ``target`` is perturbed in place one element at a time.
    """
    grad = np.zeros_like(target.data)
    flat = target.data.reshape(-1)
    grad_flat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = float(loss_fn().data)
        flat[i] = orig - eps
        f_minus = float(loss_fn().data)
        flat[i] = orig
        grad_flat[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max abs difference scaled by the gradient magnitude (floored at 1)."""
    scale = max(float(np.abs(analytic).max(initial=0.0)),
                float(np.abs(numeric).max(initial=0.0)), 1.0)
    return float(np.abs(analytic - numeric).max(initial=0.0)) / scale


def scalar_loss(out: Tensor, direction: np.ndarray) -> Tensor:
    """Project an op output onto a fixed random direction to get a scalar."""
    from gcnnas import ops

    return ops.sum_all(ops.mul(out, Tensor(direction)))


def check_grads(build_fn, params: list[Tensor], rng: np.random.Generator,
                eps: float = 1e-4) -> float:
    """Worst relative error between backprop and finite differences.

    ``build_fn()`` returns the op output tensor; a fixed random projection
    turns it into a scalar loss.
    """
    out = build_fn()
    direction = rng.standard_normal(out.shape)

    def loss_fn():
        return scalar_loss(build_fn(), direction)

    loss = loss_fn()
    for p in params:
        p.zero_grad()
    loss.backward()
    worst = 0.0
    for p in params:
        assert p.grad is not None, "parameter missed by backward pass"
        analytic = p.grad.copy()
        numeric = numerical_grad(loss_fn, p, eps=eps)
        worst = max(worst, rel_error(analytic, numeric))
    return worst
