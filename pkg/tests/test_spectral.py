"""Spectral codec: analysis shapes, round trips, phase reconstruction,
mu-law companding, and the distance metric."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from soundmesh import spectral as sp


CFG = sp.StftConfig()
SR = CFG.sample_rate


def harmonic_tone(f0, amps, phases=None, n=16000, sr=SR):
    t = np.arange(n) / sr
    phases = phases if phases is not None else [0.3 * k for k in range(len(amps))]
    x = sum(a * np.sin(2 * np.pi * (k + 1) * f0 * t + p)
            for k, (a, p) in enumerate(zip(amps, phases)))
    return sp.AudioClip(x, sr)


class TestConfig:
    def test_defaults(self):
        assert CFG.bins == 257
        assert CFG.mag_floor == pytest.approx(math.log(1e-5))
        assert CFG.gamma == pytest.approx(0.25645 * 512**2)

    def test_hop_must_divide(self):
        with pytest.raises(ValueError):
            sp.StftConfig(hop=100)

    def test_fft_power_of_two(self):
        with pytest.raises(ValueError):
            sp.StftConfig(fft_size=500)

    def test_gamma_positive(self):
        with pytest.raises(ValueError):
            sp.StftConfig(gamma=-1.0)

    def test_unknown_window(self):
        with pytest.raises(ValueError):
            sp.StftConfig(window="kaiser")


class TestAnalyze:
    def test_frame_count_16000(self):
        # floor(16000/128) + 1 hops
        spec = sp.analyze(sp.AudioClip(np.random.default_rng(0).uniform(-1, 1, 16000)), CFG)
        assert spec.values.shape == (257, 126)

    def test_all_zeros_at_floor(self):
        spec = sp.analyze(sp.AudioClip(np.zeros(4000)), CFG)
        assert np.all(spec.values == CFG.mag_floor)

    def test_sine_at_bin_center(self):
        f = 37 * SR / CFG.fft_size
        t = np.arange(16000) / SR
        spec = sp.analyze(sp.AudioClip(0.5 * np.sin(2 * np.pi * f * t)), CFG)
        interior = spec.values[:, 2:-2]
        assert np.all(np.argmax(interior, axis=0) == 37)

    def test_rate_mismatch_rejected(self):
        with pytest.raises(ValueError, match="sample rate"):
            sp.analyze(sp.AudioClip(np.zeros(4000), 22050), CFG)

    def test_short_clip_rejected(self):
        with pytest.raises(ValueError, match="shorter"):
            sp.analyze(sp.AudioClip(np.zeros(100)), CFG)

    def test_values_never_below_floor(self):
        spec = sp.analyze(harmonic_tone(330, [0.4]), CFG)
        assert np.all(spec.values >= CFG.mag_floor - 1e-12)


class TestSynthesize:
    def test_cola_identity(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(-0.9, 0.9, 16000)
        clip = sp.AudioClip(x)
        z = sp.stft(clip, CFG)
        y = sp.synthesize(sp.analyze(clip, CFG), sp.PhaseField(np.angle(z)))
        n = len(y)
        err = np.abs(y.samples[512 : n - 512] - x[512 : n - 512]).max()
        assert err < 1e-6

    @settings(max_examples=12, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.05, 1.0))
    def test_cola_identity_property(self, seed, amp):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(CFG.fft_size, 6000))
        x = amp * rng.uniform(-1, 1, n)
        clip = sp.AudioClip(x)
        z = sp.stft(clip, CFG)
        y = sp.synthesize(sp.analyze(clip, CFG), sp.PhaseField(np.angle(z)))
        m = len(y)
        lo, hi = CFG.fft_size, m - CFG.fft_size
        if hi > lo:
            assert np.abs(y.samples[lo:hi] - x[lo:hi]).max() < 1e-6

    def test_zero_magnitudes_all_zero(self):
        spec = sp.analyze(sp.AudioClip(np.zeros(4000)), CFG)
        phase = sp.pghi_phase(spec, seed=3)
        y = sp.synthesize(spec, phase)
        assert np.all(y.samples == 0.0)

    def test_shape_mismatch(self):
        spec = sp.analyze(sp.AudioClip(np.zeros(4000)), CFG)
        with pytest.raises(ValueError, match="shape"):
            sp.synthesize(spec, sp.PhaseField(np.zeros((257, 10))))

    def test_output_length(self):
        spec = sp.analyze(sp.AudioClip(np.zeros(16000)), CFG)
        y = sp.synthesize(spec, sp.PhaseField(np.zeros(spec.values.shape)))
        assert len(y) == 16000


class TestPghi:
    def test_all_below_tolerance_random_reproducible(self):
        spec = sp.LogMagSpectrogram(np.full((257, 20), CFG.mag_floor), CFG)
        p1 = sp.pghi_phase(spec, seed=11)
        p2 = sp.pghi_phase(spec, seed=11)
        p3 = sp.pghi_phase(spec, seed=12)
        assert np.array_equal(p1.values, p2.values)
        assert not np.array_equal(p1.values, p3.values)
        assert np.all((p1.values >= 0) & (p1.values < 2 * np.pi))

    def test_single_significant_bin(self):
        values = np.full((257, 20), CFG.mag_floor)
        values[40, 7] = 1.0
        spec = sp.LogMagSpectrogram(values, CFG)
        phase = sp.pghi_phase(spec, seed=0)
        assert phase.values[40, 7] == 0.0
        others = np.delete(phase.values.ravel(), 40 * 20 + 7)
        assert np.all(others != 0.0)

    def test_three_partial_round_trip(self):
        clip = harmonic_tone(330, [0.5, 0.25, 0.15])
        spec = sp.analyze(clip, CFG)
        y = sp.reconstruct(spec, seed=0)
        assert sp.spectral_convergence(y, spec) <= 0.1

    def test_round_trip_sweep(self):
        # steady tones, 1..5 partials, f0 in [220, 660]
        rng = np.random.default_rng(42)
        for _ in range(8):
            k = int(rng.integers(1, 6))
            f0 = float(rng.uniform(220, 660))
            amps = 0.6 / np.arange(1, k + 1)
            amps /= max(1.0, amps.sum() * 1.1)
            clip = harmonic_tone(f0, amps, phases=rng.uniform(0, 2 * np.pi, k))
            spec = sp.analyze(clip, CFG)
            y = sp.reconstruct(spec, seed=0)
            assert sp.spectral_convergence(y, spec) <= 0.1, f"k={k} f0={f0}"

    def test_hann_round_trip(self):
        cfg = sp.StftConfig(window="hann")
        clip = harmonic_tone(330, [0.5, 0.25, 0.15])
        spec = sp.analyze(clip, cfg)
        assert sp.spectral_convergence(sp.reconstruct(spec, seed=0), spec) <= 0.1

    def test_magnitudes_never_touched(self):
        spec = sp.analyze(harmonic_tone(440, [0.5]), CFG)
        before = spec.values.copy()
        sp.pghi_phase(spec, seed=0)
        assert np.array_equal(spec.values, before)

    def test_determinism(self):
        spec = sp.analyze(harmonic_tone(440, [0.5, 0.2]), CFG)
        a = sp.pghi_phase(spec, seed=9)
        b = sp.pghi_phase(spec, seed=9)
        assert np.array_equal(a.values, b.values)

    def test_tol_validation(self):
        spec = sp.analyze(sp.AudioClip(np.zeros(4000)), CFG)
        for bad in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValueError):
                sp.pghi_phase(spec, tol=bad)

    def test_nonfinite_rejected(self):
        values = np.full((257, 10), -1.0)
        values[3, 3] = np.nan
        with pytest.raises(ValueError):
            sp.pghi_phase(sp.LogMagSpectrogram(values, CFG), seed=0)


class TestMuLaw:
    def test_bounds(self):
        assert sp.mulaw_encode(1.0) == 255
        assert sp.mulaw_encode(-1.0) == 0
        assert sp.mulaw_encode(0.0) == 128

    def test_decode_bounds(self):
        assert sp.mulaw_decode(255) == pytest.approx(1.0)
        assert sp.mulaw_decode(0) == pytest.approx(-1.0)

    def test_decode_range_check(self):
        with pytest.raises(ValueError):
            sp.mulaw_decode(256)
        with pytest.raises(ValueError):
            sp.mulaw_decode(-1)

    def test_clamping(self):
        assert sp.mulaw_encode(1.7) == 255
        assert sp.mulaw_encode(-3.0) == 0

    def test_round_trip_bound_sweep(self):
        # quantization error against the analytic slope bound
        x = np.linspace(-1, 1, 10**4)
        err = np.abs(sp.mulaw_decode(sp.mulaw_encode(x)) - x)
        bound = (1 + 255 * np.abs(x)) * math.log(256) / 255
        assert np.all(err <= bound)

    @settings(max_examples=80, deadline=None)
    @given(st.floats(-1, 1), st.floats(-1, 1))
    def test_monotone(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assert sp.mulaw_encode(lo) <= sp.mulaw_encode(hi)

    def test_array_api(self):
        codes = sp.mulaw_encode(np.array([-1.0, 0.0, 1.0]))
        assert codes.tolist() == [0, 128, 255]
        vals = sp.mulaw_decode(codes)
        assert vals.shape == (3,)


class TestSpecDistance:
    def test_identical_zero(self):
        a = sp.analyze(harmonic_tone(330, [0.5]), CFG)
        assert sp.spec_distance(a, a) == 0.0

    def test_unit_offset_closed_form(self):
        a = sp.LogMagSpectrogram(np.zeros((257, 126)), CFG)
        b = sp.LogMagSpectrogram(np.ones((257, 126)), CFG)
        assert sp.spec_distance(a, b) == pytest.approx(math.sqrt(32382))

    def test_symmetry_and_triangle(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            a, b, c = (sp.LogMagSpectrogram(rng.normal(size=(33, 9)), sp.StftConfig(fft_size=64, hop=16))
                       for _ in range(3))
            dab, dba = sp.spec_distance(a, b), sp.spec_distance(b, a)
            assert dab == dba >= 0.0
            assert sp.spec_distance(a, c) <= dab + sp.spec_distance(b, c) + 1e-9

    def test_shape_mismatch(self):
        a = sp.LogMagSpectrogram(np.zeros((257, 10)), CFG)
        b = sp.LogMagSpectrogram(np.zeros((257, 11)), CFG)
        with pytest.raises(ValueError, match="shape"):
            sp.spec_distance(a, b)
