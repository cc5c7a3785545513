import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimocs.estimator import build_angle_grid
from mimocs.geometry import (ArrayGeometry, Jammer, NoiseModel, Target, draw_jammer_waveform,
                             generate_waveforms, jammer_term, project_aperture,
                             random_geometry, signal_power, snr_to_sigma, steering_vector,
                             synthesize_received)
from mimocs.rng import Purpose, stream

from conftest import LAM, disk_geometry, origin_rx_geometry

angles = st.floats(-np.pi, np.pi, allow_nan=False)


class TestProjectAperture:
    def test_examples(self):
        assert project_aperture((1, 0), 0.0) == 1.0
        assert project_aperture((0, 2), np.pi / 2) == pytest.approx(2.0, abs=1e-15)
        assert project_aperture((3, 4), np.arctan2(4, 3)) == pytest.approx(5.0, abs=1e-14)

    @given(x=st.floats(-1e3, 1e3), y=st.floats(-1e3, 1e3), th=angles)
    def test_formula(self, x, y, th):
        assert project_aperture((x, y), th) == x * np.cos(th) + y * np.sin(th)


class TestSteeringVector:
    def test_origin_is_one(self):
        g = ArrayGeometry([[0, 0]], [[0, 0]], LAM)
        assert np.allclose(steering_vector(g, "tx", 0.7), [1 + 0j])

    def test_quarter_wave(self):
        g = ArrayGeometry([[LAM / 4, 0]], [[0, 0]], LAM)
        assert np.allclose(steering_vector(g, "tx", 0.0), [1j], atol=1e-15)

    def test_broadside(self):
        g = ArrayGeometry([[LAM / 2, 0]], [[0, 0]], LAM)
        assert np.allclose(steering_vector(g, "tx", np.pi / 2), [1], atol=1e-14)

    def test_lengths(self):
        g = disk_geometry(7, 3)
        assert steering_vector(g, "tx", 0.1).shape == (7,)
        assert steering_vector(g, "rx", 0.1).shape == (3,)
        assert steering_vector(g, "tx", [0.1, 0.2]).shape == (7, 2)

    def test_bad_side(self):
        with pytest.raises(ValueError):
            steering_vector(disk_geometry(2, 1), "both", 0.0)

    @given(th=angles)
    @settings(max_examples=50)
    def test_unit_modulus_and_periodic(self, th):
        g = disk_geometry(8, 3, radius_wl=10)
        v = steering_vector(g, "tx", th)
        assert np.allclose(np.abs(v), 1, atol=1e-12)
        # position*k is ~1e2 rad, so period error is float rounding only
        assert np.allclose(v, steering_vector(g, "tx", th + 2 * np.pi), atol=1e-9)


class TestWaveforms:
    def test_single_column(self):
        X = generate_waveforms(1, 4, np.random.default_rng(0)).samples
        assert X.shape == (4, 1)
        assert np.linalg.norm(X) == pytest.approx(1.0, abs=1e-14)

    def test_full_size_orthonormal(self):
        X = generate_waveforms(30, 512, np.random.default_rng(0)).samples
        assert X.shape == (512, 30)
        assert np.max(np.abs(X.conj().T @ X - np.eye(30))) < 1e-10

    def test_raw_qpsk_equal_modulus(self):
        W = generate_waveforms(4, 64, np.random.default_rng(0), orthonormalize=False)
        assert not W.orthonormal
        assert np.allclose(np.abs(W.samples), 1 / np.sqrt(64))
        assert set(np.unique(np.sign(W.samples.real))) == {-1.0, 1.0}

    def test_deterministic(self):
        a = generate_waveforms(30, 512, stream(5, Purpose.WAVEFORM)).samples
        b = generate_waveforms(30, 512, stream(5, Purpose.WAVEFORM)).samples
        assert np.array_equal(a, b)

    def test_rejects_short_pulse(self):
        with pytest.raises(ValueError):
            generate_waveforms(30, 20, np.random.default_rng(0))

    @given(th=angles)
    @settings(max_examples=30)
    def test_norm_of_xv(self, th):
        g = disk_geometry(30, 1)
        X = generate_waveforms(30, 128, np.random.default_rng(3)).samples
        assert np.linalg.norm(X @ steering_vector(g, "tx", th)) == pytest.approx(
            np.sqrt(30), abs=1e-8)


class TestGeometry:
    def test_within_disk(self):
        g = random_geometry(200, 50, LAM, 3.0, np.random.default_rng(0))
        assert np.all(np.hypot(*g.tx_positions.T) <= 3.0)
        assert np.all(np.hypot(*g.rx_positions.T) <= 3.0)

    def test_shared_positions(self):
        g = random_geometry(5, 3, LAM, 3.0, np.random.default_rng(0), shared=True)
        assert np.array_equal(g.rx_positions, g.tx_positions[:3])

    @pytest.mark.parametrize("tx,rx,lam", [([], [[0, 0]], 1.0), ([[0, 0]], [[np.inf, 0]], 1.0),
                                            ([[0, 0]], [[0, 0]], 0.0)])
    def test_invalid(self, tx, rx, lam):
        with pytest.raises(ValueError):
            ArrayGeometry(np.array(tx).reshape(-1, 2), np.array(rx).reshape(-1, 2), lam)

    def test_target_invariants(self):
        with pytest.raises(ValueError):
            Target(-1.0, 0.0, 1)
        with pytest.raises(ValueError):
            Target(100.0, 4.0, 1)

    def test_jammer_unit_norm(self):
        with pytest.raises(ValueError):
            Jammer(100.0, 0.0, 1.0, np.ones(4))
        b = draw_jammer_waveform(64, np.random.default_rng(0))
        assert abs(np.linalg.norm(b) - 1) < 1e-12


class TestSnr:
    def test_unit_power(self):
        # one transmit and one receive antenna at the origin, |beta|=1: power 1/L per sample
        g = ArrayGeometry([[0, 0]], [[0, 0]], LAM)
        X = np.ones((4, 1)) / 2
        t = [Target(1000.0, 0.0, 2.0)]
        assert signal_power(g, X, t) == pytest.approx(1.0)
        assert snr_to_sigma(t, g, X, 0) == pytest.approx(1.0)
        assert snr_to_sigma(t, g, X, 20) == pytest.approx(0.01)

    def test_no_targets(self):
        g = disk_geometry(2, 1)
        with pytest.raises(ValueError):
            snr_to_sigma([], g, np.eye(2), 10)
        with pytest.raises(ValueError):
            snr_to_sigma([Target(5000.0, 0.0, 0)], g, np.eye(2), 10)

    def test_two_target_scene_matches_direct_average(self):
        g = disk_geometry(30, 1)
        X = generate_waveforms(30, 512, np.random.default_rng(0)).samples
        targets = [Target(5000.0, np.deg2rad(-3), 1), Target(5130.7, np.deg2rad(-2), 1)]
        z = synthesize_received(g, X, targets).snapshots
        sigma2 = snr_to_sigma(targets, g, X, 20)
        assert sigma2 == pytest.approx(np.mean(np.abs(z) ** 2) / 100, rel=1e-12)
        # two unit echoes through orthonormal X: about 2 Mt / L per sample
        assert 0.5 < sigma2 * 100 / (2 * 30 / 512) < 1.5


class TestSynthesis:
    def test_empty_scene(self):
        g = disk_geometry(4, 2)
        z = synthesize_received(g, generate_waveforms(4, 8, np.random.default_rng(0)))
        assert z.snapshots.shape == (2, 8) and not np.any(z.snapshots)

    def test_single_target_origin(self):
        g = origin_rx_geometry(6)
        X = generate_waveforms(6, 16, np.random.default_rng(1)).samples
        t = Target(4321.0, np.deg2rad(1.4), 0.5 - 0.2j)
        z = synthesize_received(g, X, [t]).snapshots[0]
        v = np.exp(2j * np.pi / LAM * (g.tx_positions @ [np.cos(t.azimuth), np.sin(t.azimuth)]))
        expected = np.exp(-4j * np.pi * 4321.0 / LAM) * (0.5 - 0.2j) * X @ v
        assert np.allclose(z, expected, atol=1e-12)
        assert t.grid_amplitude(LAM) == pytest.approx(np.exp(-4j * np.pi * 4321.0 / LAM)
                                                      * (0.5 - 0.2j))

    def test_linear_in_beta(self):
        g = disk_geometry(8, 3)
        X = generate_waveforms(8, 32, np.random.default_rng(1)).samples
        t1 = [Target(5000.0, 0.1, 1 + 1j), Target(6000.0, -0.05, 0.3)]
        t2 = [Target(t.range, t.azimuth, 2 * t.beta) for t in t1]
        z1 = synthesize_received(g, X, t1).snapshots
        z2 = synthesize_received(g, X, t2).snapshots
        assert np.array_equal(z2, 2 * z1)

    def test_off_grid_flag(self):
        g = disk_geometry(4, 1)
        X = generate_waveforms(4, 8, np.random.default_rng(0)).samples
        grid = build_angle_grid(-5, 5, 0.2)
        t = [Target(5000.0, np.deg2rad(-3), 1), Target(5000.0, np.deg2rad(-2.5), 1),
             Target(5000.0, np.deg2rad(-2.3), 1)]
        assert synthesize_received(g, X, t, grid_angles=grid.angles).off_grid == (1, 2)

    def test_far_field_warning(self):
        g = disk_geometry(4, 1, radius_wl=100)
        X = generate_waveforms(4, 8, np.random.default_rng(0)).samples
        with pytest.warns(UserWarning):
            synthesize_received(g, X, [Target(10.0, 0.0, 1)])
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            synthesize_received(g, X, [Target(5000.0, 0.0, 1)])

    def test_noise_energy(self):
        # E||e||^2 = L sigma^2, within three standard errors
        L, sigma2, n = 64, 0.7, 4000
        e = NoiseModel(sigma2).draw((n, L), np.random.default_rng(0))
        energy = np.sum(np.abs(e) ** 2, axis=1)
        assert abs(energy.mean() - L * sigma2) < 3 * energy.std(ddof=1) / np.sqrt(n)
        # circular: real and imaginary parts each carry half
        assert np.var(e.real) == pytest.approx(sigma2 / 2, rel=0.02)
        assert np.var(e.imag) == pytest.approx(sigma2 / 2, rel=0.02)
        assert abs(np.mean(e * e)) < 0.01

    def test_noise_needs_rng(self):
        g = disk_geometry(2, 1)
        with pytest.raises(ValueError):
            synthesize_received(g, np.eye(2), noise=NoiseModel(1.0))

    def test_deterministic(self):
        g = disk_geometry(30, 2)
        X = generate_waveforms(30, 64, stream(9, Purpose.WAVEFORM)).samples
        t = [Target(5000.0, -0.05, 1)]
        runs = [synthesize_received(g, X, t, None, NoiseModel(0.3),
                                    stream(9, Purpose.NOISE)).snapshots for _ in range(2)]
        assert np.array_equal(*runs)

    def test_jammer_power_after_compression(self):
        # E||Phi b beta||^2 = |beta|^2 M / L for an M x L orthonormal-row Phi
        from mimocs.estimator import draw_measurement
        g = disk_geometry(30, 1)
        L, M, beta, trials = 512, 15, 10.0, 1000
        X = generate_waveforms(30, L, np.random.default_rng(0)).samples
        powers = []
        for k in range(trials):
            b = draw_jammer_waveform(L, stream(k, Purpose.JAMMER))
            zj = jammer_term(g, Jammer(7000.0, 0.0, beta, b))[0]
            phi = draw_measurement("plain", M, L, 30, X, stream(k, Purpose.MEASUREMENT)).effective
            powers.append(np.linalg.norm(phi @ zj) ** 2)
        powers = np.array(powers)
        expected = beta ** 2 * M / L
        assert abs(powers.mean() - expected) < 4 * powers.std(ddof=1) / np.sqrt(trials)


class TestRng:
    def test_streams_independent_of_request_order(self):
        a = stream(3, Purpose.NOISE, trial=2, antenna=1).standard_normal(4)
        stream(3, Purpose.WAVEFORM, trial=0).standard_normal(100)
        b = stream(3, Purpose.NOISE, trial=2, antenna=1).standard_normal(4)
        assert np.array_equal(a, b)

    def test_distinct_slots(self):
        draws = {(t, a, p): stream(0, p, t, a).integers(0, 2 ** 62)
                 for t in range(3) for a in (None, 0, 1) for p in Purpose}
        assert len(set(draws.values())) == len(draws)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            stream(-1, Purpose.NOISE)
