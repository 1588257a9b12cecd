"""Shared fixtures: small acquisition setups and a cached reference sweep."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import mla_forge as mf
from mla_forge.imaging import MlaConfig, apodized_sum, mla_line_plan
from mla_forge.rx_frontend import build_iq_cube, iq_demodulate, sla_line_plan

settings.register_profile(
    "ci", derandomize=True, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def desk_cfg():
    """32-element, 70-line, 256-depth setup used by the artifact-level checks."""
    return mf.AcquisitionConfig(
        element_count=32,
        active_tx_count=14,
        line_count=70,
        depth_samples=256,
        depth_range=60e-3,
        tx_focus_depth=40e-3,
    )


@pytest.fixture(scope="session")
def tiny_cfg():
    """Small, fast setup for contract-level pipeline tests."""
    return mf.AcquisitionConfig(
        element_count=8,
        active_tx_count=4,
        line_count=20,
        depth_samples=64,
        depth_range=40e-3,
        tx_focus_depth=25e-3,
        sector_angle_span=math.radians(40),
    )


class SweepBundle:
    """One speckle sweep with demodulated events and derived cubes/images."""

    def __init__(self, cfg, seed=1, n_scatterers=250):
        self.cfg = cfg
        self.phantom = mf.make_phantom("random_speckle", seed, cfg, n_scatterers=n_scatterers)
        self.frames = mf.simulate_sweep(cfg, self.phantom)
        self.iq = {f.tx_line_index: iq_demodulate(f, cfg) for f in self.frames}
        self.hann = mf.hann_window(cfg.element_count)
        self.sla_cube = build_iq_cube(self.iq, sla_line_plan(cfg), cfg)
        self.sla_image = apodized_sum(self.sla_cube, self.hann)
        self.mla_cubes = {}
        self.mla_images = {}
        for m in (5, 7):
            mla = MlaConfig(factor=m)
            plan = mla_line_plan(cfg, mla)
            kept = sorted({ev for _, ev in plan})
            cube = build_iq_cube({ev: self.iq[ev] for ev in kept}, plan, cfg)
            self.mla_cubes[m] = cube
            self.mla_images[m] = apodized_sum(cube, self.hann)


@pytest.fixture(scope="session")
def desk_sweep(desk_cfg):
    return SweepBundle(desk_cfg, seed=1, n_scatterers=250)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
