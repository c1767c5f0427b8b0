"""Differentiable operations over :class:`~gcnnas.tensor.Tensor`.

Shapes follow the N x C x T x V activation layout. Temporal convolutions
run through the kernel backend (compiled extension when available);
everything else is numpy.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as kernels
from .errors import ArgumentError, StructuralError
from .tensor import Parameter, Tensor, as_tensor, make_op


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape).astype(a.dtype, copy=False))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape).astype(b.dtype, copy=False))

    return make_op(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    if np.isscalar(b) or isinstance(b, (int, float, np.floating)):
        scale = float(b)

        def backward_scalar(g):
            if a.requires_grad:
                a.accumulate_grad((g * scale).astype(a.dtype, copy=False))

        return make_op(a.data * scale, (a,), backward_scalar)
    b = as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape).astype(a.dtype, copy=False))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape).astype(b.dtype, copy=False))

    return make_op(out_data, (a, b), backward)


def matmul(a, b) -> Tensor:
    """Matrix product, plain 2-D or batched 3-D with matching batch."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == b.ndim == 2:
        if a.shape[1] != b.shape[0]:
            raise StructuralError(f"matmul inner dims {a.shape} x {b.shape}")
    elif a.ndim == b.ndim == 3:
        if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
            raise StructuralError(f"batched matmul dims {a.shape} x {b.shape}")
    else:
        raise StructuralError(f"matmul supports 2-D or 3-D pairs, got {a.ndim}-D x {b.ndim}-D")
    out_data = a.data @ b.data

    def backward(g):
        if a.ndim == 2:
            if a.requires_grad:
                a.accumulate_grad(g @ b.data.T)
            if b.requires_grad:
                b.accumulate_grad(a.data.T @ g)
        else:
            if a.requires_grad:
                a.accumulate_grad(g @ b.data.transpose(0, 2, 1))
            if b.requires_grad:
                b.accumulate_grad(a.data.transpose(0, 2, 1) @ g)

    return make_op(out_data, (a, b), backward)


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * mask)

    return make_op(x.data * mask, (x,), backward)


def softmax_lastdim(x: Tensor) -> Tensor:
    """Row-stochastic softmax over the last axis, max-stabilized."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        if x.requires_grad:
            inner = (g * y).sum(axis=-1, keepdims=True)
            x.accumulate_grad(y * (g - inner))

    return make_op(y, (x,), backward)


def reshape(x: Tensor, shape) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(x.shape))

    return make_op(x.data.reshape(shape), (x,), backward)


def mean_axis(x: Tensor, axis: int) -> Tensor:
    x = as_tensor(x)
    n = x.shape[axis]

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.repeat(np.expand_dims(g / n, axis), n, axis=axis))

    return make_op(x.data.mean(axis=axis), (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.broadcast_to(g, x.shape).astype(x.dtype, copy=False))

    return make_op(np.asarray(x.data.sum()), (x,), backward)


def pairwise_scores(phi: Tensor, psi: Tensor) -> Tensor:
    """Joint-by-joint similarity scores from two embeddings.

    Both inputs are (N, C, T, V); the contraction pairs identical
    (channel, frame) coordinates, so score[n, i, j] is the inner product
    of joint i's and joint j's flattened feature profiles.
    """
    phi, psi = as_tensor(phi), as_tensor(psi)
    if phi.shape != psi.shape:
        raise StructuralError(f"embedding shapes differ: {phi.shape} vs {psi.shape}")
    n, c, t, v = phi.shape
    pf = phi.data.reshape(n, c * t, v)
    sf = psi.data.reshape(n, c * t, v)
    scores = np.einsum("nfi,nfj->nij", pf, sf, optimize=True)

    def backward(g):
        if phi.requires_grad:
            phi.accumulate_grad(
                np.einsum("nij,nfj->nfi", g, sf, optimize=True).reshape(phi.shape)
            )
        if psi.requires_grad:
            psi.accumulate_grad(
                np.einsum("nij,nfi->nfj", g, pf, optimize=True).reshape(psi.shape)
            )

    return make_op(scores, (phi, psi), backward)


def graph_propagate(x: Tensor, adj) -> Tensor:
    """Aggregate joint features through a propagation matrix.

    ``adj`` is (V, V) shared across the batch or (N, V, V) per element;
    out[..., i] = sum_j adj[i, j] * x[..., j].
    """
    x = as_tensor(x)
    a = as_tensor(adj)
    v = x.shape[-1]
    if a.ndim == 2:
        if a.shape != (v, v):
            raise StructuralError(f"propagation matrix {a.shape} vs V={v}")
        out_data = np.einsum("ij,nctj->ncti", a.data, x.data, optimize=True)
    elif a.ndim == 3:
        if a.shape != (x.shape[0], v, v):
            raise StructuralError(f"propagation matrix {a.shape} vs x {x.shape}")
        out_data = np.einsum("nij,nctj->ncti", a.data, x.data, optimize=True)
    else:
        raise StructuralError(f"propagation matrix must be 2-D or 3-D, got {a.ndim}-D")

    def backward(g):
        if x.requires_grad:
            if a.ndim == 2:
                x.accumulate_grad(np.einsum("ncti,ij->nctj", g, a.data, optimize=True))
            else:
                x.accumulate_grad(np.einsum("nij,ncti->nctj", a.data, g, optimize=True))
        if a.requires_grad:
            if a.ndim == 2:
                a.accumulate_grad(np.einsum("ncti,nctj->ij", g, x.data, optimize=True))
            else:
                a.accumulate_grad(np.einsum("ncti,nctj->nij", g, x.data, optimize=True))

    return make_op(out_data, (x, a), backward)


def _check_conv_kernel(x: Tensor, w: Tensor, expect_k: int | None) -> None:
    if w.ndim != 4 or w.shape[3] != 1:
        raise StructuralError(f"kernel must span (C_out, C_in, k, 1), got {w.shape}")
    if w.shape[1] != x.shape[1]:
        raise StructuralError(f"kernel C_in={w.shape[1]} vs input C={x.shape[1]}")
    if expect_k is not None and w.shape[2] != expect_k:
        raise StructuralError(f"kernel frame span {w.shape[2]}, expected {expect_k}")


def conv_temporal(x: Tensor, w: Tensor, bias: Tensor | None = None, stride: int = 1) -> Tensor:
    """Convolution along frames (kernel k x 1), zero-padded by (k-1)//2.

    Output frame count is ceil(T / stride); the joint axis is untouched.
    """
    x, w = as_tensor(x), as_tensor(w)
    _check_conv_kernel(x, w, None)
    if stride < 1:
        raise ArgumentError(f"stride must be >= 1, got {stride}")
    w2 = np.ascontiguousarray(w.data[:, :, :, 0])
    k = w2.shape[2]
    t_in = x.shape[2]
    y = kernels.temporal_conv_fwd(np.ascontiguousarray(x.data), w2, stride)
    if bias is not None:
        y = y + bias.data.reshape(1, -1, 1, 1)

    def backward(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            x.accumulate_grad(kernels.temporal_conv_bwd_x(g, w2, stride, t_in))
        if w.requires_grad:
            dw = kernels.temporal_conv_bwd_w(np.ascontiguousarray(x.data), g, stride, k)
            w.accumulate_grad(dw[:, :, :, None])
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=(0, 2, 3)))

    parents = (x, w) if bias is None else (x, w, bias)
    return make_op(y, parents, backward)


def conv_pointwise(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    """1x1 convolution: a per-position linear map over channels."""
    x, w = as_tensor(x), as_tensor(w)
    _check_conv_kernel(x, w, 1)
    w2 = w.data[:, :, 0, 0]
    y = np.einsum("oc,nctv->notv", w2, x.data, optimize=True)
    if bias is not None:
        y = y + bias.data.reshape(1, -1, 1, 1)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.einsum("oc,notv->nctv", w2, g, optimize=True))
        if w.requires_grad:
            dw = np.einsum("notv,nctv->oc", g, x.data, optimize=True)
            w.accumulate_grad(dw[:, :, None, None])
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=(0, 2, 3)))

    parents = (x, w) if bias is None else (x, w, bias)
    return make_op(y, parents, backward)


def pointwise_strided(x: Tensor, w: Tensor, stride: int) -> Tensor:
    """1x1 conv that also subsamples frames (residual projections)."""
    if stride == 1:
        return conv_pointwise(x, w)
    x = as_tensor(x)
    sub = slice_frames(x, stride)
    return conv_pointwise(sub, w)


def slice_frames(x: Tensor, stride: int) -> Tensor:
    x = as_tensor(x)
    idx = np.arange(0, x.shape[2], stride)

    def backward(g):
        if x.requires_grad:
            full = np.zeros(x.shape, dtype=g.dtype)
            full[:, :, idx, :] = g
            x.accumulate_grad(full)

    return make_op(np.ascontiguousarray(x.data[:, :, idx, :]), (x,), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over frames and joints: (N, C, T, V) -> (N, C)."""
    x = as_tensor(x)
    n, c, t, v = x.shape

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(
                np.broadcast_to(g[:, :, None, None] / (t * v), x.shape).astype(
                    x.dtype, copy=False
                )
            )

    return make_op(x.data.mean(axis=(2, 3)), (x,), backward)


def linear(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 2 or x.shape[1] != w.shape[0]:
        raise StructuralError(f"linear: input {x.shape} vs weight {w.shape}")
    y = x.data @ w.data
    if bias is not None:
        y = y + bias.data

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g @ w.data.T)
        if w.requires_grad:
            w.accumulate_grad(x.data.T @ g)
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=0))

    parents = (x, w) if bias is None else (x, w, bias)
    return make_op(y, parents, backward)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean cross-entropy of integer labels against raw logits."""
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    n, num_classes = logits.shape
    if labels.shape != (n,):
        raise StructuralError(f"labels shape {labels.shape} vs batch {n}")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ArgumentError("label out of range")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(n), labels]
    loss = np.asarray((lse - picked).mean())
    probs = np.exp(shifted - lse[:, None])

    def backward(g):
        if logits.requires_grad:
            d = probs.copy()
            d[np.arange(n), labels] -= 1.0
            logits.accumulate_grad((d * (g / n)).astype(logits.dtype, copy=False))

    return make_op(loss, (logits,), backward)


class BatchNorm:
    """Per-channel batch normalization over (N, T, V) with running stats."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5,
                 dtype=np.float32, name: str = ""):
        self.gamma = Parameter(np.ones(channels, dtype=dtype), name=f"{name}.gamma", decay=False)
        self.beta = Parameter(np.zeros(channels, dtype=dtype), name=f"{name}.beta", decay=False)
        self.running_mean = np.zeros(channels, dtype=np.float64)
        self.running_var = np.ones(channels, dtype=np.float64)
        self.momentum = momentum
        self.eps = eps
        self.training = True

    def parameters(self):
        return [self.gamma, self.beta]

    def __call__(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.shape[1] != self.gamma.shape[0]:
            raise StructuralError(
                f"batchnorm over {self.gamma.shape[0]} channels, input has {x.shape[1]}"
            )
        axes = (0, 2, 3)
        gamma, beta = self.gamma, self.beta
        if self.training:
            mean = x.data.mean(axis=axes)
            var = x.data.var(axis=axes)
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mean.astype(np.float64)
            self.running_var = (1 - m) * self.running_var + m * var.astype(np.float64)
        else:
            mean = self.running_mean.astype(x.dtype)
            var = self.running_var.astype(x.dtype)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
        y = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]
        training = self.training

        def backward(g):
            if gamma.requires_grad:
                gamma.accumulate_grad((g * xhat).sum(axis=axes).astype(gamma.dtype, copy=False))
            if beta.requires_grad:
                beta.accumulate_grad(g.sum(axis=axes).astype(beta.dtype, copy=False))
            if x.requires_grad:
                dxhat = g * gamma.data[None, :, None, None]
                if training:
                    mu1 = dxhat.mean(axis=axes, keepdims=True)
                    mu2 = (dxhat * xhat).mean(axis=axes, keepdims=True)
                    dx = (dxhat - mu1 - xhat * mu2) * inv_std[None, :, None, None]
                else:
                    dx = dxhat * inv_std[None, :, None, None]
                x.accumulate_grad(dx.astype(x.dtype, copy=False))

        return make_op(y, (x, gamma, beta), backward)

    def state(self) -> dict:
        return {"running_mean": self.running_mean.copy(), "running_var": self.running_var.copy()}

    def load_state(self, state: dict) -> None:
        self.running_mean = np.asarray(state["running_mean"], dtype=np.float64).copy()
        self.running_var = np.asarray(state["running_var"], dtype=np.float64).copy()
