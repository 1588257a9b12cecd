"""mla_forge: phased-array ultrasound simulation, MLA artifact synthesis,
and a learned interpolation + apodization corrector.

The pipeline mirrors a clinical acquisition chain: simulate raw channel data
for point-scatterer phantoms, demodulate and dynamically focus it into an
element-wise I/Q cube, decimate transmit events to emulate multi-line
acquisition, beamform classically, and train a convolutional network to
restore single-line acquisition quality.
"""

from .fieldsim import Phantom, RfFrame, excitation_pulse, make_phantom, simulate_channel_data, simulate_sweep
from .geometry import (
    AcquisitionConfig,
    ScanLine,
    config_hash,
    element_positions,
    hann_window,
    rx_aperture,
    rx_arrival_time,
    scan_line,
    scan_lines,
    tx_delays,
)
from .imaging import BeamformedImage, MlaConfig, apodized_sum, envelope_logcompress, mla_line_plan
from .metrics import CorrelationProfile, SsimParams, adjacent_correlation_profile, decorrelation, ssim
from .rx_frontend import IqChannels, IqCube, build_iq_cube, dynamic_focus, iq_demodulate

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "ScanLine",
    "config_hash",
    "element_positions",
    "hann_window",
    "rx_aperture",
    "rx_arrival_time",
    "scan_line",
    "scan_lines",
    "tx_delays",
    "Phantom",
    "RfFrame",
    "excitation_pulse",
    "make_phantom",
    "simulate_channel_data",
    "simulate_sweep",
    "IqChannels",
    "IqCube",
    "build_iq_cube",
    "dynamic_focus",
    "iq_demodulate",
    "BeamformedImage",
    "MlaConfig",
    "apodized_sum",
    "envelope_logcompress",
    "mla_line_plan",
    "CorrelationProfile",
    "SsimParams",
    "adjacent_correlation_profile",
    "decorrelation",
    "ssim",
    "__version__",
]
