"""Waveform synthesis: pulse shape, hop codes, transmit train."""

import math

import numpy as np
import pytest
from scipy import stats

from uwbsync import (
    ConfigError,
    FrameConfig,
    SampledWaveform,
    SymbolSequence,
    generate_tx,
    make_th_code,
    monocycle,
    sampled_monocycle,
)
from uwbsync.defaults import default_frame_config

FS = 50e9
TP = 0.8e-9


class TestMonocycle:
    def test_even_symmetry_about_center(self):
        for x in (0.05e-9, 0.13e-9, 0.31e-9, 0.39e-9):
            left = monocycle(TP / 2 - x, TP, FS)
            right = monocycle(TP / 2 + x, TP, FS)
            assert left == pytest.approx(right, abs=0.0)

    def test_unit_energy_on_sample_grid(self):
        # Independent quadrature: plain Riemann sum over the support.
        t = np.arange(int(round(TP * FS))) / FS
        vals = monocycle(t, TP, FS)
        energy = float(np.sum(vals ** 2) / FS)
        assert energy == pytest.approx(1.0, abs=1e-6)

    def test_edge_amplitude_below_one_percent_of_peak(self):
        t = np.arange(int(round(TP * FS))) / FS
        vals = np.abs(monocycle(t, TP, FS))
        assert abs(monocycle(0.0, TP, FS)) / vals.max() < 0.01
        assert abs(monocycle(TP, TP, FS)) / vals.max() < 0.01

    def test_zero_outside_support(self):
        assert monocycle(-0.01e-9, TP, FS) == 0.0
        assert monocycle(TP + 0.01e-9, TP, FS) == 0.0

    def test_rejects_nonpositive_duration(self):
        with pytest.raises(ConfigError):
            monocycle(0.0, 0.0, FS)
        with pytest.raises(ConfigError):
            monocycle(0.0, -1e-9, FS)

    def test_sampled_pulse_matches_pointwise_eval(self):
        pulse = sampled_monocycle(TP, FS)
        t = np.arange(len(pulse)) / FS
        assert np.array_equal(pulse, monocycle(t, TP, FS))


class TestFrameConfig:
    def test_symbol_duration_exact(self):
        cfg = default_frame_config()
        assert cfg.symbol_duration == cfg.n_frames_per_symbol * cfg.frame_duration

    def test_rejects_code_outside_alphabet(self):
        with pytest.raises(ConfigError):
            FrameConfig(th_code=tuple([35] + [0] * 31))

    def test_rejects_leaking_pulse(self):
        # chip 34 + 1 ns shift + 0.8 ns pulse > 35 ns frame
        with pytest.raises(ConfigError):
            FrameConfig(n_chips=36, th_code=tuple([34] + [0] * 31))

    def test_rejects_off_grid_chip(self):
        with pytest.raises(ConfigError):
            FrameConfig(chip_duration=1.00001e-9,
                        th_code=tuple([0] * 32))

    def test_rejects_wrong_code_length(self):
        with pytest.raises(ConfigError):
            FrameConfig(th_code=(0, 1, 2))


class TestThCode:
    def test_single_chip_alphabet_gives_all_zero(self):
        cfg = FrameConfig(n_chips=1, th_code=tuple([0] * 32))
        assert make_th_code(3, cfg) == tuple([0] * 32)

    def test_deterministic_per_seed(self):
        cfg = default_frame_config()
        assert make_th_code(11, cfg) == make_th_code(11, cfg)
        assert make_th_code(11, cfg) != make_th_code(12, cfg)

    def test_uniformity_chi_squared(self):
        # 1e4 codes of length 32 over 35 chips; chi^2 at the 1% level.
        cfg = default_frame_config()
        draws = np.concatenate([
            np.asarray(make_th_code(seed, cfg)) for seed in range(7, 7 + 10_000)
        ])
        counts = np.bincount(draws, minlength=cfg.n_chips)
        expected = len(draws) / cfg.n_chips
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        threshold = stats.chi2.ppf(0.99, df=cfg.n_chips - 1)
        assert chi2 < threshold


class TestGenerateTx:
    def test_single_pulse_reduction(self):
        # One frame, all-zero code, bit 0: the output is the bare pulse
        # padded to one frame.
        cfg = FrameConfig(n_frames_per_symbol=1, th_code=(0,), n_chips=1)
        tx = generate_tx(SymbolSequence.fixed([0]), cfg)
        pulse = sampled_monocycle(cfg.pulse_duration, cfg.sample_rate)
        expected = np.zeros(cfg.n_frame_samples)
        expected[:len(pulse)] = math.sqrt(cfg.pulse_energy) * pulse
        assert np.array_equal(tx.samples, expected)

    def test_ppm_shift_is_sample_exact(self):
        cfg = default_frame_config()
        tx0 = generate_tx(SymbolSequence.fixed([0]), cfg)
        tx1 = generate_tx(SymbolSequence.fixed([1]), cfg)
        n = cfg.n_shift_samples
        assert np.array_equal(tx1.samples[n:], tx0.samples[:-n])
        assert np.all(tx1.samples[:n] == 0.0)

    def test_energy_scales_with_pulse_count(self):
        cfg = default_frame_config()
        k = 4
        tx = generate_tx(SymbolSequence.random(k, 99), cfg)
        expected = k * cfg.n_frames_per_symbol * cfg.pulse_energy
        assert tx.energy() == pytest.approx(expected, rel=1e-3)

    def test_per_frame_energy_no_leakage(self):
        cfg = default_frame_config()
        tx = generate_tx(SymbolSequence.fixed([1]), cfg)
        nf = cfg.n_frame_samples
        for i in range(cfg.n_frames_per_symbol):
            frame = tx.samples[i * nf:(i + 1) * nf]
            energy = float(np.sum(frame ** 2) / cfg.sample_rate)
            assert energy == pytest.approx(cfg.pulse_energy, rel=1e-3)

    def test_deterministic(self):
        cfg = default_frame_config()
        bits = SymbolSequence.random(3, 5)
        a = generate_tx(bits, cfg)
        b = generate_tx(bits, cfg)
        assert np.array_equal(a.samples, b.samples)

    def test_output_length(self):
        cfg = default_frame_config()
        tx = generate_tx(SymbolSequence.random(5, 1), cfg)
        assert len(tx.samples) == 5 * cfg.n_symbol_samples

    def test_rejects_bad_bits(self):
        with pytest.raises(ValueError):
            SymbolSequence.fixed([0, 2, 1])
        with pytest.raises(ValueError):
            SymbolSequence.fixed([])


class TestSampledWaveform:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            SampledWaveform(np.array([0.0, np.nan]), FS)

    def test_duration(self):
        w = SampledWaveform(np.zeros(100), FS)
        assert w.duration == pytest.approx(100 / FS)

    def test_index_of_uses_origin(self):
        w = SampledWaveform(np.zeros(100), FS, t_start=1e-9)
        assert w.index_of(1e-9) == 0
        assert w.index_of(2e-9) == 50
