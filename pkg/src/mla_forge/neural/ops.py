"""Differentiable array primitives: convolution, pooling, strided up-convolution.

All operators take batched (N, C, H, W) arrays and come with explicit backward
functions.  im2col/GEMM keeps the convolutions fast enough for CPU training;
the transposed convolution is defined as the exact adjoint of the stride-2
convolution so the pair satisfies <conv(x), y> == <x, up_conv(y)>.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "conv2d",
    "conv2d_backward",
    "avg_pool2",
    "avg_pool2_backward",
    "up_conv2",
    "up_conv2_backward",
    "relu",
    "relu_backward",
    "l1_loss",
]


def _out_extent(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    """(N, C*kh*kw, Ho*Wo) patch matrix."""
    n, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]  # (N, C, Ho, Wo, kh, kw)
    ho, wo = windows.shape[2], windows.shape[3]
    cols = windows.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * kh * kw, ho * wo)
    return np.ascontiguousarray(cols)


def _col2im(
    cols: np.ndarray,
    x_shape: tuple[int, int, int, int],
    kh: int,
    kw: int,
    stride: int,
    pad: int,
) -> np.ndarray:
    """Adjoint of _im2col: overlap-add patches back into an image."""
    n, c, h, w = x_shape
    ho = _out_extent(h, kh, stride, pad)
    wo = _out_extent(w, kw, stride, pad)
    patches = cols.reshape(n, c, kh, kw, ho, wo)
    out = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += patches[
                :, :, i, j
            ]
    if pad:
        out = out[:, :, pad:-pad, pad:-pad]
    return out


def conv2d(
    x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int = 1, padding: int = 0
) -> np.ndarray:
    """Cross-correlation of (N, C, H, W) with (F, C, kh, kw) kernels plus bias."""
    if x.ndim != 4 or kernel.ndim != 4 or x.shape[1] != kernel.shape[1]:
        raise ValueError(f"incompatible conv shapes {x.shape} / {kernel.shape}")
    f, _, kh, kw = kernel.shape
    if bias.shape != (f,):
        raise ValueError("bias must have one entry per output channel")
    n = x.shape[0]
    ho = _out_extent(x.shape[2], kh, stride, padding)
    wo = _out_extent(x.shape[3], kw, stride, padding)
    cols = _im2col(x, kh, kw, stride, padding)
    out = np.matmul(kernel.reshape(f, -1), cols)  # (N, F, Ho*Wo)
    out += bias[None, :, None]
    return out.reshape(n, f, ho, wo)


def conv2d_backward(
    grad_out: np.ndarray,
    x: np.ndarray,
    kernel: np.ndarray,
    stride: int = 1,
    padding: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dkernel, dbias) of conv2d."""
    f, c, kh, kw = kernel.shape
    n = x.shape[0]
    g = grad_out.reshape(n, f, -1)
    cols = _im2col(x, kh, kw, stride, padding)
    grad_kernel = np.einsum("nfp,nkp->fk", g, cols).reshape(kernel.shape)
    grad_bias = g.sum(axis=(0, 2))
    gcols = np.matmul(kernel.reshape(f, -1).T, g)  # (N, C*kh*kw, P)
    grad_x = _col2im(gcols, x.shape, kh, kw, stride, padding)
    return grad_x, grad_kernel, grad_bias


def _grad_input_conv(
    grad_out: np.ndarray,
    kernel: np.ndarray,
    x_shape: tuple[int, int, int, int],
    stride: int,
    padding: int,
) -> np.ndarray:
    f = kernel.shape[0]
    n = grad_out.shape[0]
    g = grad_out.reshape(n, f, -1)
    gcols = np.matmul(kernel.reshape(f, -1).T, g)
    return _col2im(gcols, x_shape, kernel.shape[2], kernel.shape[3], stride, padding)


def avg_pool2(x: np.ndarray) -> np.ndarray:
    """Non-overlapping 2x2 spatial means; odd extents are edge-replicated first."""
    x = _pad_to_even(x)
    n, c, h, w = x.shape
    return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def avg_pool2_backward(grad_out: np.ndarray, x_shape: tuple[int, int, int, int]) -> np.ndarray:
    """Gradient of avg_pool2 for an input of the given (possibly odd) shape."""
    g = np.repeat(np.repeat(grad_out, 2, axis=2), 2, axis=3) * 0.25
    n, c, h, w = x_shape
    if g.shape[2] > h:  # fold the replicated bottom row back onto the edge
        g[:, :, h - 1, :] += g[:, :, h, :]
        g = g[:, :, :h, :]
    if g.shape[3] > w:
        g[:, :, :, w - 1] += g[:, :, :, w]
        g = g[:, :, :, :w]
    return np.ascontiguousarray(g)


def _pad_to_even(x: np.ndarray) -> np.ndarray:
    pad_h = x.shape[2] % 2
    pad_w = x.shape[3] % 2
    if pad_h or pad_w:
        x = np.pad(x, ((0, 0), (0, 0), (0, pad_h), (0, pad_w)), mode="edge")
    return x


def up_conv2(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Fractionally-strided convolution doubling both spatial extents.

    kernel has shape (C_in, C_out, kh, kw) and the operator is the adjoint of
    a stride-2, pad-1 convolution with that kernel.
    """
    c_in, c_out, kh, kw = kernel.shape
    if x.shape[1] != c_in:
        raise ValueError(f"incompatible up-conv shapes {x.shape} / {kernel.shape}")
    if bias.shape != (c_out,):
        raise ValueError("bias must have one entry per output channel")
    n, _, h, w = x.shape
    out_shape = (n, c_out, 2 * h, 2 * w)
    out = _grad_input_conv(x, kernel, out_shape, stride=2, padding=kh // 2)
    out += bias[None, :, None, None]
    return out


def up_conv2_backward(
    grad_out: np.ndarray, x: np.ndarray, kernel: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dkernel, dbias) of up_conv2."""
    c_in, c_out, kh, kw = kernel.shape
    pad = kh // 2
    grad_x = conv2d(
        grad_out, kernel, np.zeros(c_in, dtype=kernel.dtype), stride=2, padding=pad
    )
    # weight gradient mirrors conv2d's with the roles of input and output swapped
    n = x.shape[0]
    cols = _im2col(grad_out, kh, kw, stride=2, pad=pad)
    grad_kernel = np.einsum("nfp,nkp->fk", x.reshape(n, c_in, -1), cols).reshape(kernel.shape)
    grad_bias = grad_out.sum(axis=(0, 2, 3))
    return grad_x, grad_kernel, grad_bias


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0.0)


def l1_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean absolute error and its (sub)gradient w.r.t. pred (0 at exact ties)."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.abs(diff).mean())
    grad = np.sign(diff) / diff.size
    return loss, grad.astype(pred.dtype, copy=False)
