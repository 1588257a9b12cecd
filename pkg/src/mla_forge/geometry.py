"""Acquisition configuration and deterministic array geometry.

Everything downstream (simulation, focusing, imaging) pulls its physical
constants from :class:`AcquisitionConfig`.  All functions here are pure and
operate on immutable inputs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

__all__ = [
    "AcquisitionConfig",
    "ScanLine",
    "scan_line",
    "scan_lines",
    "element_positions",
    "active_tx_indices",
    "tx_delays",
    "rx_arrival_time",
    "rx_arrival_times",
    "rx_aperture",
    "rx_aperture_bounds",
    "hann_window",
    "config_hash",
]

# Index-space slack when deciding whether an element sits inside the rx
# aperture; ~1e-9 of an element, so only exact-boundary cases are affected.
_APERTURE_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class AcquisitionConfig:
    """Array, pulse, scan and sampling geometry for one acquisition setup.

    Defaults describe the 64-element cardiac probe driven at 2.5 MHz with
    140 scan lines; smaller configurations are used throughout the tests.
    All quantities are SI (meters, seconds, Hz, radians).
    """

    element_count: int = 64
    active_tx_count: int = 28
    pitch: float = 0.3e-3
    center_frequency: float = 2.5e6
    pulse_cycles: float = 1.75
    tx_focus_depth: float = 71e-3
    sound_speed: float = 1540.0
    sampling_rate: float = 20e6
    rx_f_number: float = 1.0
    line_count: int = 140
    sector_angle_span: float = math.radians(60.0)
    depth_samples: int = 652
    depth_range: float = 110e-3

    def __post_init__(self) -> None:
        if self.element_count < 1:
            raise ValueError("element_count must be >= 1")
        if not (1 <= self.active_tx_count <= self.element_count):
            raise ValueError("need element_count >= active_tx_count >= 1")
        for name in (
            "pitch",
            "center_frequency",
            "pulse_cycles",
            "tx_focus_depth",
            "sound_speed",
            "sampling_rate",
            "rx_f_number",
            "depth_range",
        ):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.line_count < 1:
            raise ValueError("line_count must be >= 1")
        if self.depth_samples < 1:
            raise ValueError("depth_samples must be >= 1")
        if not self.sampling_rate > 2.0 * self.center_frequency:
            raise ValueError("sampling_rate must exceed 2x center_frequency")
        if not 0.0 < self.sector_angle_span < math.pi:
            raise ValueError("sector_angle_span must lie in (0, pi)")

    @property
    def pulse_duration(self) -> float:
        """Support of the excitation pulse in seconds."""
        return self.pulse_cycles / self.center_frequency

    @property
    def aperture_width(self) -> float:
        """Distance between the outermost element centers."""
        return (self.element_count - 1) * self.pitch

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AcquisitionConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("config JSON must be an object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class ScanLine:
    """One receive/transmit direction, fanning out from the array center."""

    index: int
    angle: float


def scan_line(cfg: AcquisitionConfig, index: int) -> ScanLine:
    """Line direction for a given index; evenly spaced, symmetric about broadside."""
    if not 0 <= index < cfg.line_count:
        raise ValueError(f"line index {index} outside 0..{cfg.line_count - 1}")
    if cfg.line_count == 1:
        return ScanLine(index=0, angle=0.0)
    step = cfg.sector_angle_span / (cfg.line_count - 1)
    angle = (index - (cfg.line_count - 1) / 2.0) * step
    return ScanLine(index=index, angle=angle)


def scan_lines(cfg: AcquisitionConfig) -> list[ScanLine]:
    return [scan_line(cfg, i) for i in range(cfg.line_count)]


def element_positions(cfg: AcquisitionConfig) -> np.ndarray:
    """(element_count, 2) element centers on the x-axis, centered at the origin."""
    x = (np.arange(cfg.element_count) - (cfg.element_count - 1) / 2.0) * cfg.pitch
    return np.stack([x, np.zeros_like(x)], axis=1)


def active_tx_indices(cfg: AcquisitionConfig) -> np.ndarray:
    """Indices of the central transmit sub-aperture, fixed for all lines."""
    start = (cfg.element_count - cfg.active_tx_count) // 2
    return np.arange(start, start + cfg.active_tx_count)


def _focal_point(cfg: AcquisitionConfig, line: ScanLine) -> np.ndarray:
    return cfg.tx_focus_depth * np.array([math.sin(line.angle), math.cos(line.angle)])


def tx_delays(cfg: AcquisitionConfig, line: ScanLine) -> np.ndarray:
    """Per-active-element firing delays focusing the transmit at tx_focus_depth.

    The element farthest from the focal point fires at t=0; every contribution
    then reaches the focus simultaneously.
    """
    pos = element_positions(cfg)[active_tx_indices(cfg)]
    focus = _focal_point(cfg, line)
    dist = np.hypot(pos[:, 0] - focus[0], pos[:, 1] - focus[1])
    return (dist.max() - dist) / cfg.sound_speed


def rx_arrival_time(
    cfg: AcquisitionConfig, element_index: int, line: ScanLine, depth
):
    """Two-way echo time for a field point at `depth` along `line`.

    Transmit leg modeled as a spherical wave from the array center (depth/c);
    receive leg is the exact element-to-point distance.  `depth` may be a
    scalar or an array.
    """
    pos = element_positions(cfg)[element_index]
    depth = np.asarray(depth, dtype=float)
    px = depth * math.sin(line.angle)
    pz = depth * math.cos(line.angle)
    return depth / cfg.sound_speed + np.hypot(px - pos[0], pz - pos[1]) / cfg.sound_speed


def rx_arrival_times(
    cfg: AcquisitionConfig, line: ScanLine, depths: np.ndarray
) -> np.ndarray:
    """(len(depths), element_count) arrival-time table for one line."""
    pos = element_positions(cfg)
    depths = np.asarray(depths, dtype=float)
    px = depths[:, None] * math.sin(line.angle)
    pz = depths[:, None] * math.cos(line.angle)
    rx = np.hypot(px - pos[None, :, 0], pz - pos[None, :, 1])
    return (depths[:, None] + rx) / cfg.sound_speed


def rx_aperture(cfg: AcquisitionConfig, depth: float) -> range:
    """Contiguous element indices active at `depth` under the f-number rule.

    Aperture width grows as depth / rx_f_number, centered on the array
    center, clamped to the full array and never empty.
    """
    lo, hi = rx_aperture_bounds(cfg, np.asarray([depth], dtype=float))
    return range(int(lo[0]), int(hi[0]) + 1)


def rx_aperture_bounds(
    cfg: AcquisitionConfig, depths: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized inclusive (lo, hi) aperture index bounds per depth."""
    depths = np.asarray(depths, dtype=float)
    if np.any(depths < 0):
        raise ValueError("depth must be non-negative")
    center = (cfg.element_count - 1) / 2.0
    half_elems = 0.5 * depths / cfg.rx_f_number / cfg.pitch
    lo = np.ceil(center - half_elems - _APERTURE_EDGE_TOL)
    hi = np.floor(center + half_elems + _APERTURE_EDGE_TOL)
    lo = np.clip(lo, 0, cfg.element_count - 1).astype(np.int64)
    hi = np.clip(hi, 0, cfg.element_count - 1).astype(np.int64)
    degenerate = lo > hi
    middle = cfg.element_count // 2
    lo[degenerate] = middle
    hi[degenerate] = middle
    return lo, hi


def hann_window(n: int) -> np.ndarray:
    """Symmetric Hann window with unit peak; {1} for n == 1."""
    if n < 1:
        raise ValueError("window length must be >= 1")
    return np.hanning(n)


def config_hash(cfg: AcquisitionConfig) -> str:
    """Stable hex digest identifying a configuration across files."""
    canonical = json.dumps(asdict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
