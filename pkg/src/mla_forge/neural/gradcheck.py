"""Finite-difference verification of the full network's analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import NetConfig, NetParams, init_net_params, network_loss_and_grads

__all__ = ["GradCheckReport", "grad_check", "make_check_sample"]


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    coords_checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def make_check_sample(
    net_cfg: NetConfig, spatial: tuple[int, int] = (16, 16), seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Random float64 (input, target) pair sized for the given network."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((net_cfg.input_channels, *spatial))
    y = rng.standard_normal((2, *spatial))
    return x, y


def grad_check(
    net_cfg: NetConfig,
    sample: tuple[np.ndarray, np.ndarray],
    tolerance: float = 1e-4,
    n_coords: int = 200,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic parameter gradients against central finite differences.

    Checks at least n_coords randomly chosen coordinates spread over every
    parameter tensor, in 64-bit, with a per-coordinate step scaled by the
    parameter magnitude.  Relative error uses |fd - an| / max(|fd| + |an|, 1e-12).
    """
    x, target = sample
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    params = init_net_params(net_cfg, seed=seed, dtype=np.float64)
    # break exact ties so the L1 subgradient is unambiguous at every coordinate
    params.apod_bias += 1e-3

    _, grads = network_loss_and_grads(x, target, params, net_cfg)
    flat_p = params.flat()
    flat_g = grads.flat()

    rng = np.random.default_rng(seed + 1)
    sizes = np.array([p.size for p in flat_p])
    total = int(sizes.sum())
    n_coords = min(max(n_coords, len(flat_p)), total)
    # sample without replacement over the concatenated parameter vector, but
    # guarantee every tensor contributes at least one coordinate
    chosen = set(rng.choice(total, size=n_coords, replace=False).tolist())
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    for t in range(len(flat_p)):
        if not any(offsets[t] <= c < offsets[t + 1] for c in chosen):
            chosen.add(int(offsets[t] + rng.integers(sizes[t])))

    max_rel = 0.0
    for flat_index in sorted(chosen):
        t = int(np.searchsorted(offsets, flat_index, side="right") - 1)
        local = flat_index - offsets[t]
        p = flat_p[t]
        view = p.reshape(-1)
        h = 1e-5 * max(1.0, abs(view[local]))
        orig = view[local]
        view[local] = orig + h
        loss_plus, _ = network_loss_and_grads(x, target, params, net_cfg)
        view[local] = orig - h
        loss_minus, _ = network_loss_and_grads(x, target, params, net_cfg)
        view[local] = orig
        fd = (loss_plus - loss_minus) / (2.0 * h)
        an = flat_g[t].reshape(-1)[local]
        rel = abs(fd - an) / max(abs(fd) + abs(an), 1e-12)
        max_rel = max(max_rel, rel)
    return GradCheckReport(max_rel_error=max_rel, coords_checked=len(chosen), tolerance=tolerance)
