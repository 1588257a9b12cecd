"""RF-to-baseband receive chain: I/Q demodulation, dynamic focusing, cube assembly.

The output of this stage is the time-delayed, phase-rotated element-wise I/Q
cube (depth x elements x Rx lines) that both the classical summation path and
the correction network consume.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.signal import fftconvolve, firwin

from .fieldsim import RfFrame
from .geometry import (
    AcquisitionConfig,
    ScanLine,
    rx_aperture_bounds,
    rx_arrival_times,
    scan_line,
)

__all__ = [
    "IqChannels",
    "IqCube",
    "DEMOD_TAP_COUNT",
    "demod_lowpass_taps",
    "iq_demodulate",
    "depth_grid",
    "sample_iq",
    "dynamic_focus",
    "build_iq_cube",
    "sla_line_plan",
]

DEMOD_TAP_COUNT = 63


@dataclass(frozen=True)
class IqChannels:
    """Complex baseband channel data for one transmit event: (time, element)."""

    data: np.ndarray
    carrier: float
    t0: float


@dataclass(frozen=True)
class IqCube:
    """Focused element-wise I/Q data, (depth, element, rx line).

    line_sources[l] records which transmit event produced Rx line l; under
    SLA this is the identity, under m-MLA it is constant within each group.
    """

    data: np.ndarray
    line_sources: np.ndarray


def demod_lowpass_taps(cfg: AcquisitionConfig, num_taps: int = DEMOD_TAP_COUNT) -> np.ndarray:
    """Windowed-sinc FIR, cutoff at half the carrier, unity DC gain."""
    return firwin(num_taps, cfg.center_frequency / 2.0, window="blackman", fs=cfg.sampling_rate)


def iq_demodulate(frame: RfFrame, cfg: AcquisitionConfig) -> IqChannels:
    """Mix the RF down by the carrier and low-pass filter, sample rate unchanged.

    The symmetric FIR is applied centered (group delay compensated), so the
    filter contributes no phase of its own.
    """
    n = frame.samples.shape[0]
    t = frame.t0 + np.arange(n) / cfg.sampling_rate
    mixed = frame.samples * np.exp(-2j * np.pi * cfg.center_frequency * t)[:, None]
    taps = demod_lowpass_taps(cfg)
    baseband = fftconvolve(mixed, taps[:, None], mode="same", axes=0)
    return IqChannels(data=baseband, carrier=cfg.center_frequency, t0=frame.t0)


def depth_grid(cfg: AcquisitionConfig) -> np.ndarray:
    """Uniform depth grid over (0, depth_range], one point per depth sample."""
    return cfg.depth_range * (np.arange(cfg.depth_samples) + 1.0) / cfg.depth_samples


def sample_iq(iq: IqChannels, times: np.ndarray, sampling_rate: float) -> np.ndarray:
    """Linearly interpolate each element's channel at per-element times.

    times has shape (depth, element) matching iq.data's element axis; points
    outside the recorded interval return 0 (no extrapolation).
    """
    data = iq.data
    n, n_elem = data.shape
    idx = (times - iq.t0) * sampling_rate
    valid = (idx >= 0.0) & (idx <= n - 1)
    idx = np.clip(idx, 0.0, n - 1)
    i0 = np.floor(idx).astype(np.int64)
    i1 = np.minimum(i0 + 1, n - 1)
    frac = idx - i0
    cols = np.arange(n_elem)[None, :]
    vals = data[i0, cols] * (1.0 - frac) + data[i1, cols] * frac
    return np.where(valid, vals, 0.0)


def dynamic_focus(iq: IqChannels, line: ScanLine, cfg: AcquisitionConfig) -> np.ndarray:
    """Depth-focused, phase-rotated, aperture-masked element data for one line.

    Returns (depth_samples, element_count) complex values: the channel sampled
    at its two-way arrival time, rotated to restore the carrier phase removed
    by demodulation, and zeroed outside the f-number aperture.
    """
    depths = depth_grid(cfg)
    times = rx_arrival_times(cfg, line, depths)
    sampled = sample_iq(iq, times, cfg.sampling_rate)
    phase = np.exp(
        2j * np.pi * cfg.center_frequency * (times - 2.0 * depths[:, None] / cfg.sound_speed)
    )
    lo, hi = rx_aperture_bounds(cfg, depths)
    elems = np.arange(cfg.element_count)[None, :]
    mask = (elems >= lo[:, None]) & (elems <= hi[:, None])
    return sampled * phase * mask


def sla_line_plan(cfg: AcquisitionConfig) -> list[tuple[int, int]]:
    """Identity plan: Rx line l is focused from transmit event l."""
    return [(l, l) for l in range(cfg.line_count)]


def build_iq_cube(
    frames: Mapping[int, IqChannels],
    line_plan: Sequence[tuple[int, int]],
    cfg: AcquisitionConfig,
) -> IqCube:
    """Assemble the (depth, element, line) cube following a line plan.

    Each plan entry (rx_line, source_tx_event) focuses the named event's
    channel data along the Rx line's direction.  The plan must cover every
    Rx line exactly once and reference only available events.
    """
    lines_seen = [rx for rx, _ in line_plan]
    if sorted(lines_seen) != list(range(cfg.line_count)):
        raise ValueError("line plan must cover each Rx line exactly once")
    missing = sorted({ev for _, ev in line_plan} - set(frames))
    if missing:
        raise ValueError(f"line plan references missing transmit events: {missing}")

    data = np.zeros(
        (cfg.depth_samples, cfg.element_count, cfg.line_count), dtype=np.complex128
    )
    sources = np.zeros(cfg.line_count, dtype=np.int64)
    for rx_line, event in line_plan:
        data[:, :, rx_line] = dynamic_focus(frames[event], scan_line(cfg, rx_line), cfg)
        sources[rx_line] = event
    return IqCube(data=data, line_sources=sources)
