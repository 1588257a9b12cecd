"""Image-quality evaluation: adjacent-line correlation, decorrelation, SSIM.

Decorrelation compares the mean correlation of adjacent Rx-line pairs inside
MLA groups against pairs straddling group boundaries; a well-corrected (or
SLA) image scores near zero, an uncompensated MLA image scores strongly
positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .imaging import BeamformedImage, MlaConfig

__all__ = [
    "CorrelationProfile",
    "SsimParams",
    "default_roi",
    "adjacent_correlation_profile",
    "decorrelation",
    "decorrelation_of_profile",
    "ssim",
]


@dataclass(frozen=True)
class CorrelationProfile:
    """Normalized correlation magnitude for each adjacent Rx-line pair."""

    rho: np.ndarray

    def cross_group_pairs(self, mla: MlaConfig) -> np.ndarray:
        """Boolean mask of pairs that straddle a group boundary of `mla`."""
        if mla.factor < 2:
            raise ValueError("group boundaries require an MLA factor >= 2")
        pair_index = np.arange(len(self.rho))
        return (pair_index + 1) % mla.factor == 0


def default_roi(depth_samples: int) -> slice:
    """Central 80% of depth samples, skipping near-field aperture transients."""
    margin = depth_samples // 10
    return slice(margin, depth_samples - margin)


def adjacent_correlation_profile(
    img: BeamformedImage, roi: slice | None = None
) -> CorrelationProfile:
    """Correlation coefficient magnitude between each pair of adjacent lines.

    rho_l = |<x_l, x_{l+1}>| / (||x_l|| * ||x_{l+1}||) over the depth ROI;
    pairs involving a zero-energy line yield 0.
    """
    data = img.data
    if roi is None:
        roi = default_roi(data.shape[0])
    x = data[roi, :]
    if x.shape[0] == 0:
        raise ValueError("empty depth ROI")
    inner = np.abs(np.sum(x[:, :-1] * np.conj(x[:, 1:]), axis=0))
    energy = np.sum(np.abs(x) ** 2, axis=0)
    denom = np.sqrt(energy[:-1] * energy[1:])
    rho = np.zeros_like(inner)
    ok = denom > 0.0
    rho[ok] = inner[ok] / denom[ok]
    return CorrelationProfile(rho=np.clip(rho, 0.0, 1.0))


def decorrelation_of_profile(profile: CorrelationProfile, mla: MlaConfig) -> float:
    """Percent gap between mean intra-group and mean cross-group correlation."""
    cross = profile.cross_group_pairs(mla)
    if not cross.any() or cross.all():
        raise ValueError("decorrelation needs both intra- and cross-group pairs")
    return 100.0 * float(profile.rho[~cross].mean() - profile.rho[cross].mean())


def decorrelation(
    img: BeamformedImage, mla: MlaConfig, roi: slice | None = None
) -> float:
    """Decorrelation of an image's adjacent-line profile, in percent.

    For an SLA image, `mla` supplies the hypothetical group boundaries the
    comparison is evaluated against.
    """
    return decorrelation_of_profile(adjacent_correlation_profile(img, roi), mla)


@dataclass(frozen=True)
class SsimParams:
    """Sliding-window SSIM constants; uniform (box) windows."""

    window_size: int = 11
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 60.0

    def __post_init__(self) -> None:
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise ValueError("window_size must be odd and >= 3")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be positive")
        if self.dynamic_range <= 0:
            raise ValueError("dynamic_range must be positive")


def ssim(a: np.ndarray, b: np.ndarray, params: SsimParams = SsimParams()) -> float:
    """Mean structural similarity between two real images mapped to [0, L].

    Windows are uniform and fully interior (no padded borders); window
    statistics use population (1/N) normalization.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    w = params.window_size
    if a.shape[0] < w or a.shape[1] < w:
        raise ValueError("image smaller than the SSIM window")
    half = w // 2
    interior = (slice(half, a.shape[0] - half), slice(half, a.shape[1] - half))

    def win_mean(x):
        return uniform_filter(x, size=w, mode="constant")[interior]

    mu_a = win_mean(a)
    mu_b = win_mean(b)
    var_a = win_mean(a * a) - mu_a * mu_a
    var_b = win_mean(b * b) - mu_b * mu_b
    cov = win_mean(a * b) - mu_a * mu_b

    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2
    index = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(index.mean())
