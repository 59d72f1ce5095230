"""Evaluation harness: period estimation, parameter-response-time measurement,
interpolation-path stimuli with objective smoothness metrics, generator/model
consistency scoring, and the arpeggio+glide demonstration schedule.

All evaluations are pure given weights and seeds.  Audio sources are
abstracted as renderers: anything with render(schedule, n_samples) -> float
array works (trained sessions, playback oracles, analytic test signals).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .latent import ControlParams, Generator, Mesh, SoundGrid
from .performer import BreakpointSchedule, ConstantSchedule, GenSession, RnnWeights
from .spectral import AudioClip, StftConfig, analyze, spec_distance


def midi_to_hz(midi: float) -> float:
    return 440.0 * 2.0 ** ((midi - 69.0) / 12.0)


def midi_to_period(midi: float, sr: float) -> float:
    """Waveform period in samples of the equal-tempered pitch at `sr`."""
    if sr <= 0:
        raise ValueError(f"sample rate must be positive, got {sr}")
    return sr / midi_to_hz(midi)


@dataclass
class PeriodEstimate:
    period: float  # samples; NaN when confidence is 0
    confidence: float  # normalized autocorrelation peak in [0, 1]


def estimate_period(audio, center: int, window: int, sr: int = 16000,
                    f_min: float = 50.0, f_max: float = 1000.0) -> PeriodEstimate:
    """Windowed normalized autocorrelation with parabolic peak refinement.

    The default admissible lag range is [sr/1000, sr/50] samples (50 Hz to
    1 kHz).  Among correlation peaks within 95% of the maximum, the smallest
    lag wins, which suppresses octave errors for near-periodic signals.
    Silent windows return confidence 0 and an undefined (NaN) period.
    """
    samples = audio.samples if isinstance(audio, AudioClip) else np.asarray(audio)
    half = window // 2
    lo, hi = center - half, center + half
    if lo < 0 or hi > len(samples):
        raise ValueError(f"window [{lo}, {hi}) falls outside the clip")
    seg = np.asarray(samples[lo:hi], dtype=np.float64)
    seg = seg - seg.mean()
    if np.sqrt(np.mean(seg**2)) < 1e-8:
        return PeriodEstimate(float("nan"), 0.0)

    lag_min = max(2, int(round(sr / f_max)))
    lag_max = min(int(round(sr / f_min)), window - 2)
    n = len(seg)
    # raw autocorrelation via FFT, then per-lag energy normalization
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(seg, size)
    ac = np.fft.irfft(f * np.conj(f), size)[:n]
    energy = np.concatenate([[0.0], np.cumsum(seg**2)])
    # r(k) = ac[k] / sqrt(sum_{0..n-k} s^2 * sum_{k..n} s^2)
    lags = np.arange(lag_min, lag_max + 1)
    e_head = energy[n - lags] - energy[0]
    e_tail = energy[n] - energy[lags]
    denom = np.sqrt(e_head * e_tail)
    r = np.where(denom > 0, ac[lags] / denom, 0.0)

    r_max = float(r.max())
    if r_max <= 0:
        return PeriodEstimate(float("nan"), 0.0)
    local_max = np.ones(len(r), dtype=bool)
    local_max[1:] &= r[1:] >= r[:-1]
    local_max[:-1] &= r[:-1] >= r[1:]
    candidates = np.flatnonzero(local_max & (r >= 0.95 * r_max))
    k = int(candidates[0]) if candidates.size else int(np.argmax(r))
    conf = float(min(1.0, max(0.0, r[k])))

    def refine(idx: int) -> float:
        lag = float(lags[idx])
        if 0 < idx < len(r) - 1:
            a, b, c = r[idx - 1], r[idx], r[idx + 1]
            denom2 = a - 2 * b + c
            if denom2 < 0:
                lag += 0.5 * (a - c) / denom2
        return lag

    peak_lag = refine(k)
    # short periods resolve poorly on the integer lag grid; refine the highest
    # strongly-correlated multiple instead and divide back
    base = lags[k]
    multiple = int(lags[-1] // base)
    while multiple >= 2:
        lo_m = multiple * base - base // 2
        hi_m = min(multiple * base + base // 2 + 1, lags[-1] + 1)
        sel = (lags >= lo_m) & (lags < hi_m)
        if sel.any():
            j = int(np.flatnonzero(sel)[np.argmax(r[sel])])
            if r[j] >= 0.9 * r_max and 0 < j < len(r) - 1:
                peak_lag = refine(j) / multiple
                break
        multiple -= 1
    return PeriodEstimate(peak_lag, conf)


@dataclass
class PrtResult:
    step_index: int
    settle_index: int | None
    prt: int | None  # samples; None when never settled
    settled: bool
    target_period_before: float
    target_period_after: float
    measured_period_before: float | None
    measured_period_after: float | None


class ScheduleRenderer:
    """Renderer protocol: render(schedule, n_samples) -> float array."""

    def render(self, schedule, n_samples: int) -> np.ndarray:
        raise NotImplementedError


class ModelRenderer(ScheduleRenderer):
    """Renders audio from trained performer weights (fresh session per call)."""

    def __init__(self, weights: RnnWeights, seed: int = 0, temperature: float = 1.0,
                 greedy: bool = False):
        self.weights = weights
        self.seed = seed
        self.temperature = temperature
        self.greedy = greedy

    def render(self, schedule, n_samples: int) -> np.ndarray:
        session = GenSession(self.weights, seed=self.seed, temperature=self.temperature,
                             greedy=self.greedy)
        return session.render(schedule, n_samples)


class SwitchingSineRenderer(ScheduleRenderer):
    """Analytic oracle: a phase-continuous sine that tracks the schedule's
    pitch exactly, switching frequency instantly at every sample."""

    def __init__(self, sr: int = 16000, amplitude: float = 0.5):
        self.sr = sr
        self.amplitude = amplitude

    def render(self, schedule, n_samples: int) -> np.ndarray:
        values = schedule.chunk(0, n_samples)
        freqs = 440.0 * 2.0 ** ((values[:, 2].astype(np.float64) - 69.0) / 12.0)
        phase = 2 * np.pi * np.cumsum(freqs / self.sr)
        return (self.amplitude * np.sin(phase)).astype(np.float32)


def measure_prt(renderer: ScheduleRenderer, before: ControlParams, after: ControlParams,
                tol: float = 0.05, *, sr: int = 16000, lead_in: int | None = None,
                max_wait: int | None = None, window: int | None = None,
                stride: int = 16, min_confidence: float = 0.4) -> PrtResult:
    """Step the parameters and find the first window whose period matches.

    A step schedule holds `before` for the lead-in, then switches to `after`.
    settle_index is the first window center at which the estimated period is
    within `tol` (relative) of the target for `after`.  Never settling within
    `max_wait` (default 1 s) is reported, not raised.
    """
    t_before = midi_to_period(before.pitch, sr)
    t_after = midi_to_period(after.pitch, sr)
    window = window or int(round(8 * max(t_before, t_after)))
    window += window % 2
    lead_in = lead_in if lead_in is not None else max(3000, window)
    max_wait = max_wait if max_wait is not None else sr

    if before == after:
        return PrtResult(lead_in, lead_in, 0, True, t_before, t_after, t_before, t_after)

    total = lead_in + max_wait + window
    sched = BreakpointSchedule(
        [(0, before.u, before.v, before.pitch), (lead_in, after.u, after.v, after.pitch)],
        modes=["hold", "hold"],
    )
    audio = np.asarray(renderer.render(sched, total), dtype=np.float64)

    m_before = estimate_period(audio, lead_in - window // 2 - 1, window, sr)
    settle = None
    m_after = None
    for center in range(lead_in + window // 2, lead_in + max_wait, stride):
        est = estimate_period(audio, center, window, sr)
        if est.confidence >= min_confidence and abs(est.period - t_after) <= tol * t_after:
            settle = center - window // 2  # audio at the window start already matches
            m_after = est.period
            break
    if settle is None:
        tail = estimate_period(audio, lead_in + max_wait - window // 2 - 1, window, sr)
        return PrtResult(lead_in, None, None, False, t_before, t_after,
                         m_before.period, tail.period)
    settle = max(settle, lead_in)
    return PrtResult(lead_in, settle, settle - lead_in, True, t_before, t_after,
                     m_before.period, m_after)


@dataclass
class PathReport:
    step_distances: list
    cv: float
    max_over_mean: float
    path_ratio: float

    def to_dict(self) -> dict:
        return {
            "step_distances": [float(d) for d in self.step_distances],
            "cv": self.cv,
            "max_over_mean": self.max_over_mean,
            "path_ratio": self.path_ratio,
        }


class PointSource:
    """Path stimulus source: render_point(params, n_samples, seed) ->
    (AudioClip, LogMagSpectrogram)."""

    def render_point(self, params: ControlParams, n_samples: int, seed: int):
        raise NotImplementedError


class MeshPointSource(PointSource):
    """Sounds straight off a (possibly smoothed) mesh via the generator, with
    phase-reconstructed audio."""

    def __init__(self, mesh: Mesh, gen: Generator, pghi_tol: float = 1e-6):
        self.mesh = mesh
        self.gen = gen
        self.pghi_tol = pghi_tol

    def render_point(self, params: ControlParams, n_samples: int, seed: int):
        z = self.mesh.latent_at(params.u, params.v)
        spec = self.gen.generate(z, params.pitch)
        clip = spectral.reconstruct(spec, tol=self.pghi_tol, seed=seed)
        samples = clip.samples[:n_samples]
        return AudioClip(samples, self.gen.config.sample_rate), spec


class ModelPointSource(PointSource):
    """Sounds from a trained model at constant params; the spectrogram is the
    analysis of the generated audio."""

    def __init__(self, weights: RnnWeights, config: StftConfig | None = None,
                 temperature: float = 1.0, greedy: bool = False):
        self.weights = weights
        self.config = config or StftConfig()
        self.temperature = temperature
        self.greedy = greedy

    def render_point(self, params: ControlParams, n_samples: int, seed: int):
        session = GenSession(self.weights, seed=seed, temperature=self.temperature,
                             greedy=self.greedy)
        samples = session.render(ConstantSchedule(params), n_samples)
        clip = AudioClip(samples.astype(np.float64), self.config.sample_rate)
        return clip, analyze(clip, self.config)


def render_path(source: PointSource, start: ControlParams, end: ControlParams,
                steps: int = 20, clip_dur: float = 0.7,
                seed: int = 0) -> tuple[list, AudioClip, PathReport]:
    """Equidistant parameter points from start to end (inclusive), one clip
    per point, plus the concatenated stimulus and step-distance metrics."""
    if steps < 2:
        raise ValueError(f"steps must be >= 2, got {steps}")
    sr = 16000
    n = int(round(clip_dur * sr))
    clips, specs = [], []
    for k in range(steps):
        t = k / (steps - 1)
        p = ControlParams(
            start.u + t * (end.u - start.u),
            start.v + t * (end.v - start.v),
            start.pitch + t * (end.pitch - start.pitch),
        )
        clip, spec = source.render_point(p, n, seed + k)
        clips.append(clip)
        specs.append(spec)

    d = [spec_distance(specs[k], specs[k + 1]) for k in range(steps - 1)]
    d_arr = np.asarray(d)
    mean = float(d_arr.mean())
    cv = float(d_arr.std() / mean) if mean > 0 else 0.0
    max_over_mean = float(d_arr.max() / mean) if mean > 0 else 0.0
    d_end = spec_distance(specs[0], specs[-1])
    if d_arr.sum() == 0:
        ratio = 1.0
    elif d_end == 0:
        ratio = float("inf")
    else:
        ratio = float(d_arr.sum() / d_end)
    stimulus = AudioClip(np.concatenate([c.samples for c in clips]), sr)
    return clips, stimulus, PathReport(d, cv, max_over_mean, ratio)


@dataclass
class ConsistencyReport:
    distances: np.ndarray  # [R, R]
    tau: float
    fraction_within: float

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "fraction_within": self.fraction_within,
            "distances": [[float(x) for x in row] for row in self.distances],
        }


def consistency(grid: SoundGrid, synth, tau: float, *, seed: int = 0,
                temperature: float = 1.0, greedy: bool = False) -> ConsistencyReport:
    """Compare every grid cell's sound against audio synthesized at that
    cell's parameters, as spectrogram distance.

    Both sides go through the same analysis (the reference is the analyzed
    grid audio), so the playback oracle scores exactly zero distance.
    `synth` is either trained RnnWeights or a callable
    (params, n_samples, seed) -> samples.  The summary is the fraction of
    cells with distance <= tau.
    """
    r = grid.resolution
    n = grid.audio.shape[2]
    dist = np.zeros((r, r))
    for i in range(r):
        for j in range(r):
            p = grid.params(i, j)
            cell_seed = seed + i * r + j
            if isinstance(synth, RnnWeights):
                session = GenSession(synth, seed=cell_seed, temperature=temperature,
                                     greedy=greedy)
                samples = session.render(ConstantSchedule(p), n)
            else:
                samples = synth(p, n, cell_seed)
            clip = AudioClip(np.asarray(samples, dtype=np.float64), grid.config.sample_rate)
            spec = analyze(clip, grid.config)
            reference = analyze(grid.cell_audio(i, j), grid.config)
            dist[i, j] = spec_distance(spec, reference)
    frac = float(np.mean(dist <= tau))
    return ConsistencyReport(dist, float(tau), frac)


def playback_oracle(grid: SoundGrid):
    """A synth callable that replays the grid's own audio for its cell."""

    def synth(params: ControlParams, n_samples: int, seed: int) -> np.ndarray:
        i, j = grid.cell_index(params.u, params.v)
        return grid.audio[i, j][:n_samples]

    return synth


ARPEGGIO_NOTES = (64.0, 68.0, 71.0, 76.0)


def arpeggio_glide_schedule(u: float = 0.5, v: float = 0.5, note_dur: float = 0.5,
                            glide_dur: float = 2.0, sr: int = 16000,
                            glide_from: float = 76.0, glide_to: float = 64.0):
    """The demonstration schedule: an arpeggio over an octave then a
    one-octave descending glide.  Returns (schedule, total_samples, markers)."""
    pts, modes = [], []
    cursor = 0
    note_n = int(round(note_dur * sr))
    markers = {"notes": [], "glide": None}
    for midi in ARPEGGIO_NOTES:
        pts.append((cursor, u, v, midi))
        modes.append("hold")
        markers["notes"].append({"midi": midi, "start": cursor, "end": cursor + note_n})
        cursor += note_n
    glide_n = int(round(glide_dur * sr))
    pts.append((cursor, u, v, glide_from))
    modes.append("glide")
    pts.append((cursor + glide_n, u, v, glide_to))
    modes.append("hold")
    markers["glide"] = {"start": cursor, "end": cursor + glide_n,
                        "from": glide_from, "to": glide_to}
    total = cursor + glide_n
    return BreakpointSchedule(pts, modes), total, markers


def arpeggio_glide_script(renderer: ScheduleRenderer, *, sr: int = 16000,
                          u: float = 0.5, v: float = 0.5) -> tuple[AudioClip, dict]:
    """Render the arpeggio+glide schedule and measure per-note and mid-glide
    periods.  The glide check reads the period where the schedule crosses
    MIDI 70 (34.32 samples at 16 kHz; 34.35 would correspond to 70.5 by the
    same formula -- both are reported)."""
    sched, total, markers = arpeggio_glide_schedule(u=u, v=v, sr=sr)
    audio = np.asarray(renderer.render(sched, total), dtype=np.float64)

    report = {"notes": [], "schedule_samples": total}
    for note in markers["notes"]:
        mid = (note["start"] + note["end"]) // 2
        target = midi_to_period(note["midi"], sr)
        window = int(round(8 * target))
        est = estimate_period(audio, mid, window + window % 2, sr)
        report["notes"].append({
            "midi": note["midi"],
            "target_period": target,
            "measured_period": est.period,
            "confidence": est.confidence,
        })

    g = markers["glide"]
    frac = (g["from"] - 70.0) / (g["from"] - g["to"])
    center = int(round(g["start"] + frac * (g["end"] - g["start"])))
    target70 = midi_to_period(70.0, sr)
    window = int(round(8 * target70))
    est = estimate_period(audio, center, window + window % 2, sr)
    report["glide_mid"] = {
        "midi": 70.0,
        "target_period": target70,
        "alt_midi_70_5_period": midi_to_period(70.5, sr),
        "measured_period": est.period,
        "confidence": est.confidence,
    }
    end_center = g["end"] - int(round(4 * midi_to_period(g["to"], sr)))
    w_end = int(round(8 * midi_to_period(g["to"], sr)))
    est_end = estimate_period(audio, end_center, w_end + w_end % 2, sr)
    report["glide_end"] = {
        "midi": g["to"],
        "target_period": midi_to_period(g["to"], sr),
        "measured_period": est_end.period,
        "confidence": est_end.confidence,
    }
    return AudioClip(audio, sr), report
