"""Pure-numpy reference kernels for the temporal convolution.

Array contracts (shared with the compiled backend):
  x: (N, C_in, T, V)    activations
  w: (C_out, C_in, K)   kernel taps along the frame axis
  y: (N, C_out, T_out, V) with T_out = ceil(T / stride)

Frames are zero-padded by (K - 1) // 2 on both sides.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

BACKEND = "reference"


def _pad_frames(x: np.ndarray, pad: int) -> np.ndarray:
    n, c, t, v = x.shape
    out = np.zeros((n, c, t + 2 * pad, v), dtype=x.dtype)
    out[:, :, pad : pad + t, :] = x
    return out


def _frame_windows(xp: np.ndarray, t_out: int, k: int, stride: int) -> np.ndarray:
    # view (n, c, t_out, k, v) over the padded input; no copy
    sn, sc, st, sv = xp.strides
    n, c, _, v = xp.shape
    return as_strided(xp, (n, c, t_out, k, v), (sn, sc, st * stride, st, sv))


def temporal_conv_fwd(x: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    k = w.shape[2]
    pad = (k - 1) // 2
    t = x.shape[2]
    t_out = 1 + (t + 2 * pad - k) // stride
    xp = _pad_frames(x, pad)
    win = _frame_windows(xp, t_out, k, stride)
    return np.einsum("nctkv,ock->notv", win, w, optimize=True)


def temporal_conv_bwd_x(g: np.ndarray, w: np.ndarray, stride: int, t_in: int) -> np.ndarray:
    k = w.shape[2]
    pad = (k - 1) // 2
    n, _, t_out, v = g.shape
    c = w.shape[1]
    gw = np.einsum("notv,ock->nctkv", g, w, optimize=True)
    dxp = np.zeros((n, c, t_in + 2 * pad, v), dtype=g.dtype)
    for kk in range(k):
        dxp[:, :, kk : kk + stride * t_out : stride, :] += gw[:, :, :, kk, :]
    return dxp[:, :, pad : pad + t_in, :]


def temporal_conv_bwd_w(x: np.ndarray, g: np.ndarray, stride: int, k: int) -> np.ndarray:
    pad = (k - 1) // 2
    t_out = g.shape[2]
    xp = _pad_frames(x, pad)
    win = _frame_windows(xp, t_out, k, stride)
    return np.einsum("nctkv,notv->ock", win, g, optimize=True)
