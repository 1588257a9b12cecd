"""Point-scatterer synthesis of raw per-element receive (RF) channel data.

A simplified two-way model: each active transmit element fires the excitation
pulse at its focusing delay, each scatterer re-radiates, and each receive
element records the superposition with geometric 1/(d_tx*d_rx) spreading.
No directivity, attenuation or transducer impulse response.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .geometry import (
    AcquisitionConfig,
    ScanLine,
    active_tx_indices,
    element_positions,
    scan_line,
    tx_delays,
)

__all__ = [
    "Phantom",
    "RfFrame",
    "excitation_pulse",
    "rf_sample_count",
    "simulate_channel_data",
    "simulate_sweep",
    "make_phantom",
    "PHANTOM_KINDS",
]

# Regularizer added to the d_tx*d_rx spreading product so on-element
# scatterers stay finite.
SPREADING_EPS = 1e-4

PHANTOM_KINDS = ("grid_of_points", "random_speckle", "cyst")


@dataclass(frozen=True)
class Phantom:
    """Collection of point scatterers: (S, 2) positions and (S,) reflectivity."""

    positions: np.ndarray
    reflectivity: np.ndarray

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=float)
        refl = np.asarray(self.reflectivity, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError("positions must have shape (S, 2)")
        if refl.shape != (pos.shape[0],):
            raise ValueError("reflectivity must have shape (S,)")
        if pos.size and not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if refl.size and not np.all(np.isfinite(refl)):
            raise ValueError("reflectivity must be finite")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "reflectivity", refl)

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class RfFrame:
    """Raw channel data for one transmit event: (time, element) samples."""

    tx_line_index: int
    samples: np.ndarray
    t0: float


def excitation_pulse(cfg: AcquisitionConfig, t) -> np.ndarray:
    """Hann-windowed sinusoid on [0, pulse_duration]; zero outside."""
    t = np.asarray(t, dtype=float)
    T = cfg.pulse_duration
    u = t / T
    inside = (u >= 0.0) & (u <= 1.0)
    env = 0.5 * (1.0 - np.cos(2.0 * np.pi * u))
    out = np.where(inside, np.sin(2.0 * np.pi * cfg.center_frequency * t) * env, 0.0)
    return out


def rf_sample_count(cfg: AcquisitionConfig) -> int:
    """Samples needed to cover any two-way path within the scanned sector."""
    max_range = cfg.depth_range / np.cos(cfg.sector_angle_span / 2.0)
    max_path = 2.0 * (max_range + cfg.aperture_width / 2.0)
    t_end = max_path / cfg.sound_speed + cfg.pulse_duration
    return int(np.ceil(t_end * cfg.sampling_rate)) + 2


@njit(parallel=True, cache=True)
def _scatter_echoes(out, tau_tx, d_tx, d_rx, refl, fs, c, eps, pulse_t, fc):
    # out: (n_samples, n_rx); each prange worker owns one rx column, so the
    # accumulation order is fixed and the result is bit-deterministic.
    n_samples = out.shape[0]
    n_rx = out.shape[1]
    n_scat, n_tx = d_tx.shape
    two_pi = 2.0 * np.pi
    for j in prange(n_rx):
        for k in range(n_scat):
            a_k = refl[k]
            d_r = d_rx[k, j]
            t_r = d_r / c
            for i in range(n_tx):
                t_arr = tau_tx[i] + d_tx[k, i] / c + t_r
                amp = a_k / (d_tx[k, i] * d_r + eps)
                n0 = int(np.ceil(t_arr * fs))
                n1 = int(np.floor((t_arr + pulse_t) * fs))
                if n0 < 0:
                    n0 = 0
                if n1 > n_samples - 1:
                    n1 = n_samples - 1
                for n in range(n0, n1 + 1):
                    t = n / fs - t_arr
                    env = 0.5 * (1.0 - np.cos(two_pi * t / pulse_t))
                    out[n, j] += amp * np.sin(two_pi * fc * t) * env


def simulate_channel_data(
    cfg: AcquisitionConfig,
    phantom: Phantom,
    line: ScanLine,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> RfFrame:
    """Synthesize one transmit event's raw channel data.

    Raises ValueError for scatterers whose depth (z) falls outside
    (0, depth_range].  Deterministic unless noise_sigma > 0 with no rng given.
    """
    n_samples = rf_sample_count(cfg)
    out = np.zeros((n_samples, cfg.element_count), dtype=np.float64)
    if len(phantom):
        z = phantom.positions[:, 1]
        if np.any(z <= 0.0) or np.any(z > cfg.depth_range):
            raise ValueError("scatterer depth outside (0, depth_range]")
        pos = element_positions(cfg)
        tx_pos = pos[active_tx_indices(cfg)]
        tau = tx_delays(cfg, line)
        d_tx = np.hypot(
            phantom.positions[:, 0:1] - tx_pos[None, :, 0],
            phantom.positions[:, 1:2] - tx_pos[None, :, 1],
        )
        d_rx = np.hypot(
            phantom.positions[:, 0:1] - pos[None, :, 0],
            phantom.positions[:, 1:2] - pos[None, :, 1],
        )
        _scatter_echoes(
            out,
            tau,
            d_tx,
            d_rx,
            phantom.reflectivity,
            cfg.sampling_rate,
            cfg.sound_speed,
            SPREADING_EPS,
            cfg.pulse_duration,
            cfg.center_frequency,
        )
    if noise_sigma > 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        out += rng.normal(0.0, noise_sigma, size=out.shape)
    return RfFrame(tx_line_index=line.index, samples=out, t0=0.0)


def simulate_sweep(
    cfg: AcquisitionConfig,
    phantom: Phantom,
    noise_sigma: float = 0.0,
    noise_seed: int = 0,
) -> list[RfFrame]:
    """One RfFrame per scan line, in line order."""
    frames = []
    for index in range(cfg.line_count):
        rng = None
        if noise_sigma > 0.0:
            rng = np.random.default_rng((noise_seed % 2**32, index))
        frames.append(
            simulate_channel_data(cfg, phantom, scan_line(cfg, index), noise_sigma, rng)
        )
    return frames


def make_phantom(
    kind: str,
    seed: int,
    cfg: AcquisitionConfig,
    n_scatterers: int = 200,
) -> Phantom:
    """Deterministic synthetic phantom of the requested kind.

    grid_of_points: fixed 5x5 lattice across the sector (seed ignored).
    random_speckle: exactly n_scatterers uniform points, N(0,1) reflectivity.
    cyst: speckle with a scatterer-free disc carved out.
    """
    if kind not in PHANTOM_KINDS:
        raise ValueError(f"unknown phantom kind {kind!r}; expected one of {PHANTOM_KINDS}")
    half_span = cfg.sector_angle_span / 2.0
    if kind == "grid_of_points":
        angles = np.linspace(-0.6 * half_span, 0.6 * half_span, 5)
        ranges = np.linspace(0.25, 0.85, 5) * cfg.depth_range
        aa, rr = np.meshgrid(angles, ranges)
        positions = np.stack([rr * np.sin(aa), rr * np.cos(aa)], axis=-1).reshape(-1, 2)
        return Phantom(positions=positions, reflectivity=np.ones(len(positions)))

    rng = np.random.default_rng(seed % 2**64)
    angles = rng.uniform(-0.9 * half_span, 0.9 * half_span, size=n_scatterers)
    ranges = rng.uniform(0.12, 0.95, size=n_scatterers) * cfg.depth_range
    positions = np.stack([ranges * np.sin(angles), ranges * np.cos(angles)], axis=-1)
    reflectivity = rng.standard_normal(n_scatterers)
    if kind == "cyst":
        center = np.array([0.0, 0.55 * cfg.depth_range])
        radius = 0.12 * cfg.depth_range
        keep = np.hypot(*(positions - center).T) > radius
        positions = positions[keep]
        reflectivity = reflectivity[keep]
    return Phantom(positions=positions, reflectivity=reflectivity)
