"""Time-frequency codec: STFT analysis, heap-integrated phase reconstruction,
overlap-add resynthesis, mu-law companding, and spectrogram distance.

Spectrograms are single-channel log-magnitude images of shape [bins, frames]
with bins = fft_size // 2 + 1.  Analysis centers each frame on a multiple of
the hop, and the per-frame time origin sits at the window center (the frame is
circularly shifted before the DFT), so a steady sinusoid has constant phase
along its spectral ridge.  The phase-from-magnitude estimator relies on this
convention.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

MAG_FLOOR = math.log(1e-5)

# Gaussian-equivalent time-frequency constant for a length-L hann window;
# the default gaussian window is built from the same constant so the analysis
# window and the phase-gradient formulas always agree.
HANN_EQUIV_GAMMA = 0.25645


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis parameters shared by every spectrogram."""

    sample_rate: int = 16000
    fft_size: int = 512
    hop: int = 128
    window: str = "gaussian"
    gamma: float | None = None
    mag_floor: float = MAG_FLOOR

    def __post_init__(self):
        if self.fft_size <= 0 or self.fft_size & (self.fft_size - 1):
            raise ValueError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.hop <= 0 or self.fft_size % self.hop:
            raise ValueError(f"hop must divide fft_size, got hop={self.hop} fft={self.fft_size}")
        if self.window not in ("gaussian", "hann"):
            raise ValueError(f"unknown window {self.window!r}")
        if self.gamma is None:
            object.__setattr__(self, "gamma", HANN_EQUIV_GAMMA * self.fft_size**2)
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1

    def frame_count(self, n_samples: int) -> int:
        return n_samples // self.hop + 1

    def analysis_window(self) -> np.ndarray:
        m = self.fft_size
        l = np.arange(m)
        if self.window == "gaussian":
            return np.exp(-np.pi * (l - m / 2) ** 2 / self.gamma)
        return 0.5 - 0.5 * np.cos(2 * np.pi * l / m)

    def synthesis_window(self) -> np.ndarray:
        """Canonical dual of the analysis window (painless case)."""
        g = self.analysis_window()
        power = g * g
        denom = np.zeros(self.hop)
        for k in range(self.fft_size // self.hop):
            denom += power[k * self.hop : (k + 1) * self.hop]
        return g / np.tile(denom, self.fft_size // self.hop)

    def to_dict(self) -> dict:
        return {
            "sample_rate": self.sample_rate,
            "fft_size": self.fft_size,
            "hop": self.hop,
            "window": self.window,
            "gamma": self.gamma,
            "mag_floor": self.mag_floor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StftConfig":
        return cls(**d)


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio contains non-finite samples")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass
class LogMagSpectrogram:
    values: np.ndarray  # [bins, frames]
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError("spectrogram must be 2-D [bins, frames]")
        if self.values.shape[0] != self.config.bins:
            raise ValueError(
                f"expected {self.config.bins} bins for fft_size {self.config.fft_size}, "
                f"got {self.values.shape[0]}"
            )

    @property
    def bins(self) -> int:
        return self.values.shape[0]

    @property
    def frames(self) -> int:
        return self.values.shape[1]


@dataclass
class PhaseField:
    values: np.ndarray  # [bins, frames], radians

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("phase contains non-finite values")


def _frames(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Centered frames [n_frames, fft_size]; frame n is centered on n*hop."""
    pad = cfg.fft_size // 2
    xp = np.pad(x, pad, mode="reflect")
    view = np.lib.stride_tricks.sliding_window_view(xp, cfg.fft_size)
    return view[:: cfg.hop]


def stft(audio: AudioClip, cfg: StftConfig) -> np.ndarray:
    """Complex STFT [bins, frames] in the window-centered phase convention."""
    if audio.sample_rate != cfg.sample_rate:
        raise ValueError(
            f"sample rate mismatch: clip {audio.sample_rate} != config {cfg.sample_rate}"
        )
    if len(audio) < cfg.fft_size:
        raise ValueError(f"clip of {len(audio)} samples is shorter than one window")
    frames = _frames(audio.samples, cfg) * cfg.analysis_window()
    z = np.fft.rfft(frames, axis=1)
    # circular shift of the frame to the window center == per-bin sign flip
    z *= np.where(np.arange(cfg.bins) % 2, -1.0, 1.0)
    return z.T


def analyze(audio: AudioClip, cfg: StftConfig) -> LogMagSpectrogram:
    """Log-magnitude spectrogram, clamped below at cfg.mag_floor."""
    mags = np.abs(stft(audio, cfg))
    values = np.log(np.maximum(mags, math.exp(cfg.mag_floor)))
    return LogMagSpectrogram(values, cfg)


def _linear_magnitudes(spec: LogMagSpectrogram) -> np.ndarray:
    """Magnitudes with floor-clamped cells mapped to exact silence."""
    v = np.asarray(spec.values, dtype=np.float64)
    mag = np.exp(v)
    mag[v <= spec.config.mag_floor + 1e-9] = 0.0
    return mag


def synthesize(spec: LogMagSpectrogram, phase: PhaseField) -> AudioClip:
    """Overlap-add inverse STFT with canonical dual-window normalization.

    The window-squared denominator is accumulated over the frames actually
    present, so reconstruction stays exact at the clip boundaries where frame
    coverage is partial.  Output length is (frames - 1) * hop, which inverts
    analyze() exactly for inputs whose length is a hop multiple.  The peak is
    normalized only when it exceeds 1.
    """
    if spec.values.shape != phase.values.shape:
        raise ValueError(
            f"shape mismatch: magnitudes {spec.values.shape} vs phase {phase.values.shape}"
        )
    cfg = spec.config
    mag = _linear_magnitudes(spec)
    z = (mag * np.exp(1j * phase.values)).T  # [frames, bins]
    z *= np.where(np.arange(cfg.bins) % 2, -1.0, 1.0)
    frames = np.fft.irfft(z, n=cfg.fft_size, axis=1)
    g = cfg.analysis_window()
    frames *= g

    n_frames = frames.shape[0]
    n_out = (n_frames - 1) * cfg.hop
    pad = cfg.fft_size // 2
    out = np.zeros(n_out + 2 * pad)
    denom = np.zeros(n_out + 2 * pad)
    g_sq = g * g
    for n in range(n_frames):
        out[n * cfg.hop : n * cfg.hop + cfg.fft_size] += frames[n]
        denom[n * cfg.hop : n * cfg.hop + cfg.fft_size] += g_sq
    out /= np.maximum(denom, 1e-12)
    samples = out[pad : pad + n_out]

    peak = np.max(np.abs(samples)) if n_out else 0.0
    if peak > 1.0:
        samples = samples / peak
    return AudioClip(samples, cfg.sample_rate)


def _phase_gradients(values: np.ndarray, cfg: StftConfig) -> tuple[np.ndarray, np.ndarray]:
    """Phase increments per time step / per frequency step from log-magnitudes."""
    v = np.asarray(values, dtype=np.float64)
    fmul = cfg.gamma / (cfg.hop * cfg.fft_size)
    dfreq = np.gradient(v, axis=0)  # centered, one-sided at borders
    dtime = np.gradient(v, axis=1)
    bins = np.arange(v.shape[0])[:, None]
    tgrad = dfreq / fmul + 2 * np.pi * cfg.hop * bins / cfg.fft_size
    fgrad = -fmul * dtime
    return tgrad, fgrad


def pghi_phase(spec: LogMagSpectrogram, tol: float = 1e-6, seed: int = 0) -> PhaseField:
    """Reconstruct phase from magnitudes alone, without iteration.

    Phase gradients are estimated from the log-magnitude image, then
    integrated (trapezoidal rule) outward from the loudest bin over the set of
    significant bins, visiting loud bins first via a max-priority queue.
    Bins below tol * max magnitude (or at the clamp floor) get uniform random
    phase drawn from the given seed.
    """
    if not (0.0 < tol < 1.0):
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    if not np.all(np.isfinite(spec.values)):
        raise ValueError("spectrogram contains non-finite values")

    mag = _linear_magnitudes(spec)
    n_bins, n_frames = mag.shape
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0.0, 2 * np.pi, size=mag.shape)

    max_mag = mag.max()
    todo = mag > tol * max_mag if max_mag > 0 else np.zeros_like(mag, dtype=bool)
    if not todo.any():
        return PhaseField(phase)

    tgrad, fgrad = _phase_gradients(spec.values, spec.config)

    heap: list[tuple[float, int, int]] = []
    flat_order = np.argsort(mag, axis=None)[::-1]
    order_pos = 0
    n_todo = int(todo.sum())
    while n_todo:
        # start a new island at the loudest unvisited significant bin
        while True:
            idx = flat_order[order_pos]
            m, n = divmod(int(idx), n_frames)
            if todo[m, n]:
                break
            order_pos += 1
        phase[m, n] = 0.0
        todo[m, n] = False
        n_todo -= 1
        heapq.heappush(heap, (-mag[m, n], m, n))

        while heap:
            _, m, n = heapq.heappop(heap)
            p = phase[m, n]
            if m + 1 < n_bins and todo[m + 1, n]:
                phase[m + 1, n] = p + 0.5 * (fgrad[m, n] + fgrad[m + 1, n])
                todo[m + 1, n] = False
                n_todo -= 1
                heapq.heappush(heap, (-mag[m + 1, n], m + 1, n))
            if m > 0 and todo[m - 1, n]:
                phase[m - 1, n] = p - 0.5 * (fgrad[m, n] + fgrad[m - 1, n])
                todo[m - 1, n] = False
                n_todo -= 1
                heapq.heappush(heap, (-mag[m - 1, n], m - 1, n))
            if n + 1 < n_frames and todo[m, n + 1]:
                phase[m, n + 1] = p + 0.5 * (tgrad[m, n] + tgrad[m, n + 1])
                todo[m, n + 1] = False
                n_todo -= 1
                heapq.heappush(heap, (-mag[m, n + 1], m, n + 1))
            if n > 0 and todo[m, n - 1]:
                phase[m, n - 1] = p - 0.5 * (tgrad[m, n] + tgrad[m, n - 1])
                todo[m, n - 1] = False
                n_todo -= 1
                heapq.heappush(heap, (-mag[m, n - 1], m, n - 1))
    return PhaseField(phase)


def align_reflect_edges(phase: PhaseField, spec: LogMagSpectrogram, tol: float = 1e-6) -> PhaseField:
    """Rotate and snap an estimated phase field onto the reflect-padding lattice.

    Heap integration recovers phase only up to one constant per connected
    region of significant bins, but under the centered reflect-padded
    analysis convention the first frame of any true STFT is exactly real and
    the last frame is real after removing a one-sample lattice ramp.  Fitting
    that constant per region and snapping the edge frames removes most of the
    boundary error of magnitude-only reconstruction.  Interior relative
    phases are untouched.
    """
    from scipy import ndimage

    cfg = spec.config
    mag = _linear_magnitudes(spec)
    max_mag = mag.max()
    if max_mag <= 0:
        return phase
    significant = mag > tol * max_mag
    values = phase.values.copy()
    lattice = 2 * np.pi * np.arange(cfg.bins) / cfg.fft_size  # last-frame ramp, d = 1

    # 4-connectivity matches the heap's integration neighborhood
    labels, n_regions = ndimage.label(significant)
    for region in range(1, n_regions + 1):
        mask = labels == region
        first = mask[:, 0]
        last = mask[:, -1]
        # residual of the region's phases against the edge lattices
        residual = 0j
        if first.any():
            residual += np.sum(mag[first, 0] ** 2 * np.exp(2j * values[first, 0]))
        if last.any():
            residual += np.sum(mag[last, -1] ** 2 * np.exp(2j * (values[last, -1] - lattice[last])))
        if np.abs(residual) > 0:
            values[mask] += -0.5 * np.angle(residual)
        if first.any():
            values[first, 0] = np.pi * np.round(values[first, 0] / np.pi)
        if last.any():
            offset = values[last, -1] - lattice[last]
            values[last, -1] = lattice[last] + np.pi * np.round(offset / np.pi)
    return PhaseField(values)


def reconstruct(spec: LogMagSpectrogram, tol: float = 1e-6, seed: int = 0,
                align_edges: bool = True) -> AudioClip:
    """Phase reconstruction followed by inverse STFT."""
    phase = pghi_phase(spec, tol=tol, seed=seed)
    if align_edges:
        phase = align_reflect_edges(phase, spec, tol=tol)
    return synthesize(spec, phase)


def spectral_convergence(candidate: AudioClip, target: LogMagSpectrogram) -> float:
    """Relative Frobenius error between |STFT(candidate)| and target magnitudes."""
    mags = np.abs(stft(candidate, target.config))
    ref = _linear_magnitudes(target)
    return float(np.linalg.norm(mags - ref) / np.linalg.norm(ref))


MU = 255.0
_LN_MU1 = math.log(1.0 + MU)


def mulaw_encode(x):
    """Map floats in [-1, 1] (clamped) to codes 0..255, with 0.0 -> 128."""
    x = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
    y = np.sign(x) * np.log1p(MU * np.abs(x)) / _LN_MU1
    code = np.floor((y + 1.0) / 2.0 * MU + 0.5).astype(np.int64)
    code = np.clip(code, 0, 255)
    if code.ndim == 0:
        return int(code)
    return code


def mulaw_decode(code):
    """Inverse companding of a code's level midpoint."""
    code = np.asarray(code)
    if np.any((code < 0) | (code > 255)):
        raise ValueError("mu-law codes must lie in 0..255")
    y = 2.0 * code.astype(np.float64) / MU - 1.0
    x = np.sign(y) * (np.expm1(np.abs(y) * _LN_MU1)) / MU
    if x.ndim == 0:
        return float(x)
    return x


def spec_distance(a: LogMagSpectrogram, b: LogMagSpectrogram) -> float:
    """Euclidean distance between two equal-shape log-magnitude images."""
    va, vb = a.values, b.values
    if va.shape != vb.shape:
        raise ValueError(f"shape mismatch: {va.shape} vs {vb.shape}")
    return float(np.linalg.norm(np.asarray(va, dtype=np.float64) - np.asarray(vb, dtype=np.float64)))
