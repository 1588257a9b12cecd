"""RF synthesis: excitation pulse, echo timing, superposition, phantoms."""

import math

import numpy as np
import pytest

from mla_forge.fieldsim import (
    Phantom,
    excitation_pulse,
    make_phantom,
    rf_sample_count,
    simulate_channel_data,
    simulate_sweep,
)
from mla_forge.geometry import (
    AcquisitionConfig,
    active_tx_indices,
    element_positions,
    scan_line,
    tx_delays,
)


def single_tx_cfg(element_count=2, **kwargs):
    defaults = dict(
        element_count=element_count,
        active_tx_count=1,
        line_count=1,
        depth_samples=64,
        depth_range=30e-3,
        tx_focus_depth=20e-3,
    )
    defaults.update(kwargs)
    return AcquisitionConfig(**defaults)


class TestExcitationPulse:
    def test_zero_at_start(self):
        assert excitation_pulse(AcquisitionConfig(), 0.0) == 0.0

    def test_zero_outside_support(self):
        cfg = AcquisitionConfig()
        T = cfg.pulse_duration
        assert excitation_pulse(cfg, T + 1e-12) == 0.0
        assert excitation_pulse(cfg, -1e-12) == 0.0

    def test_midpoint_value(self):
        # direct evaluation oracle: envelope peaks at 1, carrier at sin(1.75*pi)
        cfg = AcquisitionConfig()
        expected = math.sin(1.75 * math.pi)  # = -sqrt(2)/2
        assert expected == pytest.approx(-0.7071067811865476, abs=1e-15)
        got = excitation_pulse(cfg, cfg.pulse_duration / 2.0)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_vectorized(self):
        cfg = AcquisitionConfig()
        t = np.linspace(-1e-6, 2e-6, 101)
        vals = excitation_pulse(cfg, t)
        assert vals.shape == t.shape
        assert np.all(vals[t < 0] == 0) and np.all(vals[t > cfg.pulse_duration] == 0)


class TestSimulateChannelData:
    def test_empty_phantom_all_zero(self):
        cfg = single_tx_cfg()
        phantom = Phantom(positions=np.empty((0, 2)), reflectivity=np.empty(0))
        frame = simulate_channel_data(cfg, phantom, scan_line(cfg, 0))
        assert frame.samples.shape == (rf_sample_count(cfg), cfg.element_count)
        assert not frame.samples.any()
        assert frame.t0 == 0.0

    def test_first_echo_time_matches_distance_oracle(self):
        # single scatterer, single active transmit element: the echo at
        # element j starts at (d_tx + d_rx) / c, within one sample period
        cfg = single_tx_cfg(element_count=2)
        scat = np.array([[1.7e-3, 19.3e-3]])
        phantom = Phantom(positions=scat, reflectivity=np.array([1.0]))
        line = scan_line(cfg, 0)
        frame = simulate_channel_data(cfg, phantom, line)

        tx_pos = element_positions(cfg)[active_tx_indices(cfg)][0]
        for j in (0, 1):
            rx_pos = element_positions(cfg)[j]
            d_tx = math.hypot(scat[0, 0] - tx_pos[0], scat[0, 1] - tx_pos[1])
            d_rx = math.hypot(scat[0, 0] - rx_pos[0], scat[0, 1] - rx_pos[1])
            t_oracle = (d_tx + d_rx) / cfg.sound_speed
            first = np.flatnonzero(frame.samples[:, j])[0] / cfg.sampling_rate
            assert t_oracle - 1e-12 <= first <= t_oracle + 1.0000001 / cfg.sampling_rate

    def test_reflectivity_scaling_exact_for_power_of_two(self):
        cfg = single_tx_cfg()
        phantom = Phantom(positions=np.array([[0.0, 15e-3]]), reflectivity=np.array([1.0]))
        doubled = Phantom(positions=phantom.positions, reflectivity=np.array([2.0]))
        line = scan_line(cfg, 0)
        a = simulate_channel_data(cfg, phantom, line).samples
        b = simulate_channel_data(cfg, doubled, line).samples
        np.testing.assert_array_equal(b, 2.0 * a)

    def test_reflectivity_scaling_general(self):
        cfg = single_tx_cfg()
        phantom = Phantom(positions=np.array([[1e-3, 12e-3]]), reflectivity=np.array([1.0]))
        scaled = Phantom(positions=phantom.positions, reflectivity=np.array([1.7]))
        line = scan_line(cfg, 0)
        a = simulate_channel_data(cfg, phantom, line).samples
        b = simulate_channel_data(cfg, scaled, line).samples
        np.testing.assert_allclose(b, 1.7 * a, rtol=1e-12, atol=0)

    def test_two_scatterers_superpose(self):
        cfg = single_tx_cfg()
        line = scan_line(cfg, 0)
        p1 = Phantom(positions=np.array([[0.0, 10e-3]]), reflectivity=np.array([1.0]))
        p2 = Phantom(positions=np.array([[2e-3, 22e-3]]), reflectivity=np.array([-0.6]))
        both = Phantom(
            positions=np.vstack([p1.positions, p2.positions]),
            reflectivity=np.concatenate([p1.reflectivity, p2.reflectivity]),
        )
        a = simulate_channel_data(cfg, p1, line).samples
        b = simulate_channel_data(cfg, p2, line).samples
        ab = simulate_channel_data(cfg, both, line).samples
        np.testing.assert_allclose(ab, a + b, rtol=1e-12, atol=1e-300)

    def test_time_support_bounds(self):
        cfg = single_tx_cfg(element_count=4)
        scats = np.array([[1e-3, 8e-3], [-2e-3, 25e-3]])
        phantom = Phantom(positions=scats, reflectivity=np.array([1.0, 1.0]))
        line = scan_line(cfg, 0)
        frame = simulate_channel_data(cfg, phantom, line)
        pos = element_positions(cfg)
        tx_pos = pos[active_tx_indices(cfg)]
        tau = tx_delays(cfg, line)
        paths = []
        for k in range(2):
            for i, tp in enumerate(tx_pos):
                for rp in pos:
                    d = math.hypot(*(scats[k] - tp)) + math.hypot(*(scats[k] - rp))
                    paths.append(tau[i] + d / cfg.sound_speed)
        nz = np.flatnonzero(frame.samples.any(axis=1))
        dt = 1.0 / cfg.sampling_rate
        assert nz[0] * dt >= min(paths) - dt
        assert nz[-1] * dt <= max(paths) + cfg.pulse_duration + dt

    def test_reciprocity_via_mirrored_scatterer(self):
        # with tx fixed on element 0, mirroring the scatterer about x=0 swaps
        # the tx and rx legs of the path to element 1, so the echo arrival
        # sample there is unchanged
        cfg = single_tx_cfg(element_count=2)
        line = scan_line(cfg, 0)
        s = np.array([[3.1e-3, 14e-3]])
        direct = simulate_channel_data(
            cfg, Phantom(positions=s, reflectivity=np.array([1.0])), line
        )
        mirrored = simulate_channel_data(
            cfg, Phantom(positions=s * [[-1.0, 1.0]], reflectivity=np.array([1.0])), line
        )
        first_direct = np.flatnonzero(direct.samples[:, 1])[0]
        first_mirrored = np.flatnonzero(mirrored.samples[:, 1])[0]
        assert first_direct == first_mirrored

    def test_out_of_range_scatterers_rejected(self):
        cfg = single_tx_cfg()
        line = scan_line(cfg, 0)
        for z in (0.0, -1e-3, cfg.depth_range + 1e-6):
            bad = Phantom(positions=np.array([[0.0, z]]), reflectivity=np.array([1.0]))
            with pytest.raises(ValueError, match="depth"):
                simulate_channel_data(cfg, bad, line)

    def test_bit_determinism(self):
        cfg = single_tx_cfg(element_count=4)
        phantom = make_phantom("random_speckle", 7, cfg, n_scatterers=40)
        line = scan_line(cfg, 0)
        a = simulate_channel_data(cfg, phantom, line).samples
        b = simulate_channel_data(cfg, phantom, line).samples
        np.testing.assert_array_equal(a, b)

    def test_noise_seeded_and_off_by_default(self):
        cfg = single_tx_cfg()
        phantom = Phantom(positions=np.empty((0, 2)), reflectivity=np.empty(0))
        quiet = simulate_channel_data(cfg, phantom, scan_line(cfg, 0))
        assert not quiet.samples.any()
        rng = np.random.default_rng(5)
        noisy = simulate_channel_data(cfg, phantom, scan_line(cfg, 0), 0.1, rng)
        assert noisy.samples.std() == pytest.approx(0.1, rel=0.05)


class TestSimulateSweep:
    def test_paper_line_count(self):
        # 140 Tx events in SLA mode; empty phantom keeps this cheap
        cfg = AcquisitionConfig(depth_range=20e-3)
        phantom = Phantom(positions=np.empty((0, 2)), reflectivity=np.empty(0))
        frames = simulate_sweep(cfg, phantom)
        assert len(frames) == 140
        assert [f.tx_line_index for f in frames] == list(range(140))
        assert not any(f.samples.any() for f in frames)

    def test_single_line_matches_channel_data(self):
        cfg = single_tx_cfg()
        phantom = make_phantom("random_speckle", 3, cfg, n_scatterers=10)
        sweep = simulate_sweep(cfg, phantom)
        direct = simulate_channel_data(cfg, phantom, scan_line(cfg, 0))
        assert len(sweep) == 1
        np.testing.assert_array_equal(sweep[0].samples, direct.samples)


class TestMakePhantom:
    def test_grid_is_fixed_lattice(self, tiny_cfg):
        a = make_phantom("grid_of_points", 0, tiny_cfg)
        b = make_phantom("grid_of_points", 999, tiny_cfg)
        assert len(a) == 25
        np.testing.assert_array_equal(a.positions, b.positions)
        np.testing.assert_array_equal(a.reflectivity, np.ones(25))

    def test_determinism_per_seed(self, tiny_cfg):
        a = make_phantom("random_speckle", 42, tiny_cfg, n_scatterers=30)
        b = make_phantom("random_speckle", 42, tiny_cfg, n_scatterers=30)
        np.testing.assert_array_equal(a.positions, b.positions)
        np.testing.assert_array_equal(a.reflectivity, b.reflectivity)
        c = make_phantom("random_speckle", 43, tiny_cfg, n_scatterers=30)
        assert not np.array_equal(a.positions, c.positions)

    def test_speckle_count_exact(self, tiny_cfg):
        assert len(make_phantom("random_speckle", 5, tiny_cfg, n_scatterers=77)) == 77

    def test_speckle_within_depth_range(self, tiny_cfg):
        p = make_phantom("random_speckle", 5, tiny_cfg, n_scatterers=200)
        assert np.all(p.positions[:, 1] > 0)
        assert np.all(p.positions[:, 1] <= tiny_cfg.depth_range)

    def test_cyst_carves_disc(self, tiny_cfg):
        p = make_phantom("cyst", 11, tiny_cfg, n_scatterers=400)
        center = np.array([0.0, 0.55 * tiny_cfg.depth_range])
        radius = 0.12 * tiny_cfg.depth_range
        dist = np.hypot(*(p.positions - center).T)
        assert len(p) < 400
        assert np.all(dist > radius)

    def test_unknown_kind(self, tiny_cfg):
        with pytest.raises(ValueError, match="unknown phantom kind"):
            make_phantom("wires", 0, tiny_cfg)

    def test_negative_seed_accepted(self, tiny_cfg):
        p = make_phantom("random_speckle", -17, tiny_cfg, n_scatterers=5)
        assert len(p) == 5


class TestPhantomValidation:
    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            Phantom(positions=np.zeros((3, 3)), reflectivity=np.zeros(3))
        with pytest.raises(ValueError):
            Phantom(positions=np.zeros((3, 2)), reflectivity=np.zeros(4))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            Phantom(positions=np.array([[0.0, np.inf]]), reflectivity=np.array([1.0]))
        with pytest.raises(ValueError):
            Phantom(positions=np.array([[0.0, 1e-3]]), reflectivity=np.array([np.nan]))
