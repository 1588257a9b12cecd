"""End-to-end correction network: interpolation encoder-decoder + apodization.

The interpolation stage is a symmetric encoder-decoder.  Each of the
`bifurcations` encoder levels applies conv3x3 + relu + 2x2 average pooling;
each decoder level applies a stride-2 up-convolution and adds the tensor that
entered the matching encoder level (additive skips).  The final level's skip
is the raw input and the output stays linear, so an all-zero parameter set is
exactly the identity map.  The apodization stage collapses the per-element
I/Q channels to a 2-channel I/Q image with one shared weight per element plus
a scalar bias, initialized to a Hann window.

Channel layout: plane 2e is element e's in-phase component, plane 2e+1 its
quadrature component.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import hann_window
from ..imaging import BeamformedImage, MlaConfig
from . import ops

__all__ = [
    "NetConfig",
    "NetParams",
    "channel_ladder",
    "init_net_params",
    "param_count",
    "pad_to_grid",
    "interpolation_forward",
    "apodization_forward",
    "network_forward",
    "network_loss_and_grads",
    "cube_to_tensor",
    "image_to_tensor",
    "tensor_to_image",
]


@dataclass(frozen=True)
class NetConfig:
    """Architecture hyper-parameters for the correction network."""

    input_channels: int
    bifurcations: int = 5
    conv_layers: int = 10
    kernel_size: int = 3
    base_channels: int = 32
    channel_cap: int = 128
    skip_mode: str = "additive"
    activation: str = "relu"

    def __post_init__(self) -> None:
        if self.input_channels < 2 or self.input_channels % 2 != 0:
            raise ValueError("input_channels must be an even count of I/Q planes")
        if self.bifurcations < 1:
            raise ValueError("need at least one bifurcation")
        if self.conv_layers != 2 * self.bifurcations:
            raise ValueError("conv_layers must equal 2 * bifurcations")
        if self.kernel_size % 2 == 0 or self.kernel_size < 1:
            raise ValueError("kernel_size must be odd")
        if self.base_channels < 1 or self.channel_cap < self.base_channels:
            raise ValueError("invalid channel widths")
        if self.skip_mode != "additive":
            raise ValueError("only additive skips are supported")
        if self.activation != "relu":
            raise ValueError("only relu activation is supported")

    @property
    def element_count(self) -> int:
        return self.input_channels // 2

    @property
    def grid_multiple(self) -> int:
        return 2**self.bifurcations


def channel_ladder(cfg: NetConfig) -> list[int]:
    """Channel width entering each level: [input, level1, ..., levelB]."""
    widths = [cfg.input_channels]
    for level in range(cfg.bifurcations):
        widths.append(min(cfg.base_channels * 2**level, cfg.channel_cap))
    return widths


@dataclass
class NetParams:
    """All learnable tensors, in a fixed flattening order for the optimizer."""

    enc_kernels: list[np.ndarray]
    enc_biases: list[np.ndarray]
    dec_kernels: list[np.ndarray]
    dec_biases: list[np.ndarray]
    apod_weights: np.ndarray
    apod_bias: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def flat(self) -> list[np.ndarray]:
        return (
            self.enc_kernels
            + self.enc_biases
            + self.dec_kernels
            + self.dec_biases
            + [self.apod_weights, self.apod_bias]
        )

    def copy(self) -> "NetParams":
        return self.astype(None)

    def astype(self, dtype) -> "NetParams":
        conv = (lambda a: a.copy()) if dtype is None else (lambda a: a.astype(dtype))
        return NetParams(
            enc_kernels=[conv(k) for k in self.enc_kernels],
            enc_biases=[conv(b) for b in self.enc_biases],
            dec_kernels=[conv(k) for k in self.dec_kernels],
            dec_biases=[conv(b) for b in self.dec_biases],
            apod_weights=conv(self.apod_weights),
            apod_bias=conv(self.apod_bias),
        )


def init_net_params(
    cfg: NetConfig, seed: int = 0, dtype=np.float32, gain: float = 0.25
) -> NetParams:
    """Seeded uniform fan-in init for convolutions, Hann window for apodization.

    Kernel entries draw from U(+-gain/sqrt(fan_in)); the conservative default
    gain keeps the untrained network close to the identity + apodization
    passthrough, so training starts from the classical beamformed image.
    """
    rng = np.random.default_rng(seed)
    widths = channel_ladder(cfg)
    k = cfg.kernel_size
    enc_k, enc_b, dec_k, dec_b = [], [], [], []
    for level in range(cfg.bifurcations):
        c_in, c_out = widths[level], widths[level + 1]
        bound = gain / np.sqrt(c_in * k * k)
        enc_k.append(rng.uniform(-bound, bound, size=(c_out, c_in, k, k)).astype(dtype))
        enc_b.append(np.zeros(c_out, dtype=dtype))
    for stage in range(cfg.bifurcations):
        # decoder stage j consumes widths[B-j] channels and emits widths[B-j-1]
        c_in = widths[cfg.bifurcations - stage]
        c_out = widths[cfg.bifurcations - stage - 1]
        bound = gain / np.sqrt(c_in * k * k)
        dec_k.append(rng.uniform(-bound, bound, size=(c_in, c_out, k, k)).astype(dtype))
        dec_b.append(np.zeros(c_out, dtype=dtype))
    return NetParams(
        enc_kernels=enc_k,
        enc_biases=enc_b,
        dec_kernels=dec_k,
        dec_biases=dec_b,
        apod_weights=hann_window(cfg.element_count).astype(dtype),
        apod_bias=np.zeros(1, dtype=dtype),
    )


def param_count(cfg: NetConfig) -> int:
    """Total learnable scalars; a pure function of the configuration."""
    widths = channel_ladder(cfg)
    k2 = cfg.kernel_size**2
    total = 0
    for level in range(cfg.bifurcations):
        total += widths[level] * widths[level + 1] * k2 + widths[level + 1]
    for stage in range(cfg.bifurcations):
        c_in = widths[cfg.bifurcations - stage]
        c_out = widths[cfg.bifurcations - stage - 1]
        total += c_in * c_out * k2 + c_out
    return total + cfg.element_count + 1


def pad_to_grid(x: np.ndarray, multiple: int) -> tuple[np.ndarray, tuple[int, int]]:
    """Reflect-pad trailing spatial edges up to a multiple of `multiple`."""
    h, w = x.shape[2], x.shape[3]
    pad_h = (-h) % multiple
    pad_w = (-w) % multiple
    if pad_h or pad_w:
        if pad_h >= h or pad_w >= w:
            raise ValueError("input too small to pad reflectively to the network grid")
        x = np.pad(x, ((0, 0), (0, 0), (0, pad_h), (0, pad_w)), mode="reflect")
    return x, (pad_h, pad_w)


def _unpad_reflect_grad(
    gp: np.ndarray, h: int, w: int, pad_h: int, pad_w: int
) -> np.ndarray:
    """Adjoint of trailing-edge reflect padding (fold mirrored rows back)."""
    g = gp.copy()
    for k in range(pad_w):
        g[:, :, :, w - 2 - k] += g[:, :, :, w + k]
    g = g[:, :, :, :w]
    for k in range(pad_h):
        g[:, :, h - 2 - k, :] += g[:, :, h + k, :]
    return np.ascontiguousarray(g[:, :, :h, :])


def _interp_forward(x: np.ndarray, params: NetParams, cfg: NetConfig):
    """Forward pass; returns the output and the cache needed for backward."""
    pad = cfg.kernel_size // 2
    b = cfg.bifurcations
    xp, pad_hw = pad_to_grid(x, cfg.grid_multiple)
    skips = [xp]  # skips[i] is the tensor entering encoder level i
    acts = []  # pre-relu conv outputs per encoder level
    pool_in_shapes = []
    h = xp
    for level in range(b):
        a = ops.conv2d(h, params.enc_kernels[level], params.enc_biases[level], 1, pad)
        acts.append(a)
        r = ops.relu(a)
        pool_in_shapes.append(r.shape)
        h = ops.avg_pool2(r)
        skips.append(h)
    dec_pre = []  # pre-relu (up-conv + skip) sums, stages 0..b-2
    dec_in = []  # tensors fed to each up-conv
    for stage in range(b):
        dec_in.append(h)
        u = ops.up_conv2(h, params.dec_kernels[stage], params.dec_biases[stage])
        s = u + skips[b - stage - 1]
        if stage < b - 1:
            dec_pre.append(s)
            h = ops.relu(s)
        else:
            h = s  # linear output stage
    out = h
    if pad_hw != (0, 0):
        out = np.ascontiguousarray(out[:, :, : x.shape[2], : x.shape[3]])
    cache = (x.shape, pad_hw, skips, acts, pool_in_shapes, dec_pre, dec_in)
    return out, cache


def _interp_backward(grad_out: np.ndarray, cache, params: NetParams, cfg: NetConfig):
    """Backward pass: (grad_x, enc_kernel_grads, enc_bias_grads, dec_kernel_grads, dec_bias_grads)."""
    x_shape, pad_hw, skips, acts, pool_in_shapes, dec_pre, dec_in = cache
    b = cfg.bifurcations
    pad = cfg.kernel_size // 2
    g = grad_out
    if pad_hw != (0, 0):
        padded = np.zeros(
            (*grad_out.shape[:2], x_shape[2] + pad_hw[0], x_shape[3] + pad_hw[1]),
            dtype=grad_out.dtype,
        )
        padded[:, :, : x_shape[2], : x_shape[3]] = grad_out
        g = padded

    grad_skips: list = [None] * (b + 1)
    dec_kg: list = [None] * b
    dec_bg: list = [None] * b
    gd = g  # gradient w.r.t. the current decoder stage's output
    for stage in range(b - 1, -1, -1):
        gt = gd if stage == b - 1 else ops.relu_backward(gd, dec_pre[stage])
        grad_skips[b - stage - 1] = gt
        gd, dec_kg[stage], dec_bg[stage] = ops.up_conv2_backward(
            gt, dec_in[stage], params.dec_kernels[stage]
        )
    grad_skips[b] = gd  # the first decoder stage consumed the bottleneck

    enc_kg: list = [None] * b
    enc_bg: list = [None] * b
    g = grad_skips[b]
    for level in range(b - 1, -1, -1):
        g = ops.avg_pool2_backward(g, pool_in_shapes[level])
        g = ops.relu_backward(g, acts[level])
        g, enc_kg[level], enc_bg[level] = ops.conv2d_backward(
            g, skips[level], params.enc_kernels[level], 1, pad
        )
        g = g + grad_skips[level]
    if pad_hw != (0, 0):
        g = _unpad_reflect_grad(g, x_shape[2], x_shape[3], pad_hw[0], pad_hw[1])
    return g, enc_kg, enc_bg, dec_kg, dec_bg


def interpolation_forward(x: np.ndarray, params: NetParams, cfg: NetConfig) -> np.ndarray:
    """Element-wise corrected tensor, same shape as the input.

    Accepts (C, H, W) or batched (N, C, H, W) with C == cfg.input_channels.
    """
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    if x.ndim != 4 or x.shape[1] != cfg.input_channels:
        raise ValueError(f"expected {cfg.input_channels} input channels, got {x.shape}")
    out, _ = _interp_forward(x, params, cfg)
    return out[0] if squeeze else out


def apodization_forward(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray | float = 0.0
) -> np.ndarray:
    """Shared per-element weighting of the I/Q planes plus a scalar bias.

    Maps (..., 2E, H, W) to (..., 2, H, W): out[0] = b + sum_e w_e x[2e],
    out[1] = b + sum_e w_e x[2e+1].
    """
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    weights = np.asarray(weights, dtype=x.dtype)
    n_elem = weights.shape[0]
    if x.shape[1] != 2 * n_elem:
        raise ValueError(f"expected {2 * n_elem} channels, got {x.shape[1]}")
    b = float(np.asarray(bias).reshape(-1)[0]) if np.ndim(bias) else float(bias)
    out_i = np.einsum("nehw,e->nhw", x[:, 0::2], weights)
    out_q = np.einsum("nehw,e->nhw", x[:, 1::2], weights)
    out = (np.stack([out_i, out_q], axis=1) + b).astype(x.dtype, copy=False)
    return out[0] if squeeze else out


def _apod_backward(grad_out: np.ndarray, x: np.ndarray, weights: np.ndarray):
    """Gradients (dx, dweights, dbias) of apodization_forward (batched)."""
    gi, gq = grad_out[:, 0], grad_out[:, 1]
    grad_w = np.einsum("nhw,nehw->e", gi, x[:, 0::2]) + np.einsum(
        "nhw,nehw->e", gq, x[:, 1::2]
    )
    grad_b = np.asarray([grad_out.sum()], dtype=x.dtype)
    grad_x = np.empty_like(x)
    grad_x[:, 0::2] = np.einsum("nhw,e->nehw", gi, weights)
    grad_x[:, 1::2] = np.einsum("nhw,e->nehw", gq, weights)
    return grad_x, grad_w.astype(x.dtype, copy=False), grad_b


def network_forward(x: np.ndarray, params: NetParams, cfg: NetConfig) -> np.ndarray:
    """Full network: interpolation stage followed by apodization."""
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    corrected, _ = _interp_forward(x, params, cfg)
    out = apodization_forward(corrected, params.apod_weights, params.apod_bias)
    return out[0] if squeeze else out


def network_loss_and_grads(
    x: np.ndarray, target: np.ndarray, params: NetParams, cfg: NetConfig
) -> tuple[float, NetParams]:
    """Mean-absolute-error loss of the full network and gradients of every tensor.

    The returned NetParams carries gradients in the same slots (and flat()
    order) as the parameters themselves.
    """
    if x.ndim == 3:
        x = x[None]
    if target.ndim == 3:
        target = target[None]
    corrected, cache = _interp_forward(x, params, cfg)
    pred = apodization_forward(corrected, params.apod_weights, params.apod_bias)
    loss, grad_pred = ops.l1_loss(pred, target)
    grad_corr, grad_w, grad_b = _apod_backward(grad_pred, corrected, params.apod_weights)
    _, enc_kg, enc_bg, dec_kg, dec_bg = _interp_backward(grad_corr, cache, params, cfg)
    grads = NetParams(
        enc_kernels=enc_kg,
        enc_biases=enc_bg,
        dec_kernels=dec_kg,
        dec_biases=dec_bg,
        apod_weights=grad_w,
        apod_bias=grad_b,
    )
    return loss, grads


def cube_to_tensor(cube_data: np.ndarray, dtype=np.float32) -> np.ndarray:
    """(depth, element, line) complex cube -> (2E, depth, line) real tensor."""
    d, e, l = cube_data.shape
    out = np.empty((2 * e, d, l), dtype=dtype)
    out[0::2] = np.moveaxis(cube_data.real, 1, 0)
    out[1::2] = np.moveaxis(cube_data.imag, 1, 0)
    return out


def image_to_tensor(image_data: np.ndarray, dtype=np.float32) -> np.ndarray:
    """(depth, line) complex image -> (2, depth, line) real tensor."""
    return np.stack([image_data.real, image_data.imag]).astype(dtype)


def tensor_to_image(
    tensor: np.ndarray, mla: MlaConfig, provenance: str = "mla_corrected"
) -> BeamformedImage:
    """(2, depth, line) real tensor -> complex BeamformedImage."""
    if tensor.ndim != 3 or tensor.shape[0] != 2:
        raise ValueError("expected a (2, depth, line) tensor")
    data = tensor[0].astype(np.float64) + 1j * tensor[1].astype(np.float64)
    return BeamformedImage(data=data, provenance=provenance, mla=mla)
