"""Latent vectors, 2D corner-spanned meshes, the generator abstraction with a
parametric harmonic/noise stand-in, and rendering of sound grids.

A mesh bilinearly interpolates four corner latents over an R x R lattice.
Rendering a grid pairs every node's spectrogram (from a generator) with
phase-reconstructed audio and the (u, v, pitch) parameters that index it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import spectral
from .spectral import AudioClip, LogMagSpectrogram, StftConfig

LATENT_DIM = 128


@dataclass(frozen=True)
class ControlParams:
    u: float
    v: float
    pitch: float

    def __post_init__(self):
        if not (0.0 <= self.u <= 1.0 and 0.0 <= self.v <= 1.0):
            raise ValueError(f"u, v must lie in [0, 1], got ({self.u}, {self.v})")

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.pitch], dtype=np.float64)


def sample_latents(count: int, seed: int, dim: int = LATENT_DIM) -> np.ndarray:
    """[count, dim] i.i.d. standard-normal latent vectors, reproducible."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return np.random.default_rng(seed).standard_normal((count, dim))


@dataclass(frozen=True)
class MeshSpec:
    """Four corner latents (z00, z10, z01, z11), grid side, and pitches."""

    corners: np.ndarray  # [4, dim]
    resolution: int = 21
    pitch_set: tuple = (70.0,)

    def __post_init__(self):
        corners = np.asarray(self.corners, dtype=np.float64)
        if corners.shape[0] != 4 or corners.ndim != 2:
            raise ValueError(f"corners must be [4, dim], got {corners.shape}")
        if not np.all(np.isfinite(corners)):
            raise ValueError("corner latents must be finite")
        for a in range(4):
            for b in range(a + 1, 4):
                if np.array_equal(corners[a], corners[b]):
                    raise ValueError(f"corners {a} and {b} are identical")
        if self.resolution < 2:
            raise ValueError(f"resolution must be >= 2, got {self.resolution}")
        object.__setattr__(self, "corners", corners)
        object.__setattr__(self, "pitch_set", tuple(float(p) for p in self.pitch_set))

    @property
    def dim(self) -> int:
        return self.corners.shape[1]


def bilinear_latent(spec: MeshSpec, u: float, v: float) -> np.ndarray:
    """Bilinear blend of the four corners; (0,0) -> z00, (1,1) -> z11."""
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise ValueError(f"u, v must lie in [0, 1], got ({u}, {v})")
    z00, z10, z01, z11 = spec.corners
    return ((1 - u) * (1 - v) * z00 + u * (1 - v) * z10
            + (1 - u) * v * z01 + u * v * z11)


@dataclass
class Mesh:
    nodes: np.ndarray  # [R, R, dim]
    spec: MeshSpec

    def __post_init__(self):
        r = self.spec.resolution
        if self.nodes.shape[:2] != (r, r):
            raise ValueError(f"nodes shape {self.nodes.shape} != ({r}, {r}, dim)")

    @property
    def resolution(self) -> int:
        return self.spec.resolution

    def latent_at(self, u: float, v: float) -> np.ndarray:
        """Piecewise-bilinear interpolation over the node lattice."""
        if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
            raise ValueError(f"u, v must lie in [0, 1], got ({u}, {v})")
        r = self.resolution
        fu, fv = u * (r - 1), v * (r - 1)
        i0 = min(int(fu), r - 2)
        j0 = min(int(fv), r - 2)
        du, dv = fu - i0, fv - j0
        n = self.nodes
        return ((1 - du) * (1 - dv) * n[i0, j0] + du * (1 - dv) * n[i0 + 1, j0]
                + (1 - du) * dv * n[i0, j0 + 1] + du * dv * n[i0 + 1, j0 + 1])


def build_mesh(spec: MeshSpec) -> Mesh:
    """nodes[i, j] = bilinear_latent(spec, i/(R-1), j/(R-1)); corners exact."""
    r = spec.resolution
    u = np.linspace(0.0, 1.0, r)[:, None, None]
    v = np.linspace(0.0, 1.0, r)[None, :, None]
    z00, z10, z01, z11 = spec.corners
    nodes = ((1 - u) * (1 - v) * z00 + u * (1 - v) * z10
             + (1 - u) * v * z01 + u * v * z11)
    # guarantee bit-exact corners regardless of float rounding
    nodes[0, 0] = z00
    nodes[r - 1, 0] = z10
    nodes[0, r - 1] = z01
    nodes[r - 1, r - 1] = z11
    return Mesh(nodes, spec)


class Generator:
    """Deterministic map from (latent, pitch) to a log-magnitude spectrogram.

    Implementations expose the StftConfig they honor and the number of frames
    they emit; generate_many is a vectorized fast path with a loop fallback.
    """

    config: StftConfig
    frames: int

    def generate(self, z: np.ndarray, pitch: float) -> LogMagSpectrogram:
        raise NotImplementedError

    def generate_many(self, zs: np.ndarray, pitch: float) -> np.ndarray:
        out = np.empty((zs.shape[0], self.config.bins, self.frames), dtype=np.float32)
        for k in range(zs.shape[0]):
            out[k] = self.generate(zs[k], pitch).values
        return out


@dataclass(frozen=True)
class SynthConfig:
    """Stand-in generator: harmonic partial amplitudes from the first K latent
    components, noise-band gains from the next B, the rest ignored.

    warp_alpha > 0 squashes each used component through a sigmoid before
    mapping, which concentrates variation near component sign changes and
    carves abrupt boundary regions into the latent space.
    """

    harmonics: int = 3
    noise_bands: int = 2
    warp_alpha: float = 0.0
    amplitude: float = 0.6
    noise_level: float = 0.05
    duration: float = 1.0
    stft: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        if not (1 <= self.harmonics <= 16):
            raise ValueError(f"harmonics must lie in 1..16, got {self.harmonics}")
        if not (0 <= self.noise_bands <= 8):
            raise ValueError(f"noise_bands must lie in 0..8, got {self.noise_bands}")
        if self.warp_alpha < 0:
            raise ValueError(f"warp_alpha must be >= 0, got {self.warp_alpha}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    def to_dict(self) -> dict:
        return {
            "harmonics": self.harmonics,
            "noise_bands": self.noise_bands,
            "warp_alpha": self.warp_alpha,
            "amplitude": self.amplitude,
            "noise_level": self.noise_level,
            "duration": self.duration,
            "stft": self.stft.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        if "stft" in d:
            d["stft"] = StftConfig.from_dict(d["stft"])
        return cls(**d)


def midi_to_hz(midi: float) -> float:
    return 440.0 * 2.0 ** ((midi - 69.0) / 12.0)


class HarmonicNoiseGenerator(Generator):
    """Deterministic time-constant spectra: Gaussian-lobe partials at
    multiples of the pitch frequency plus smooth noise bands."""

    def __init__(self, config: SynthConfig):
        self.synth = config
        self.config = config.stft
        n_samples = int(round(config.duration * self.config.sample_rate))
        self.frames = self.config.frame_count(n_samples)
        g = self.config.analysis_window()
        self._peak_scale = float(np.sum(g)) / 2.0
        self._lobe_coeff = np.pi * self.config.gamma / self.config.fft_size**2

    def _mapped(self, zs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Latents [n, dim] -> (partial amplitudes [n, K], band gains [n, B])."""
        c = self.synth
        used = np.asarray(zs, dtype=np.float64)[:, : c.harmonics + c.noise_bands]
        if c.warp_alpha > 0:
            used = expit(c.warp_alpha * used)
        raw = np.logaddexp(0.0, used[:, : c.harmonics])  # softplus
        amps = raw / raw.sum(axis=1, keepdims=True)
        gains = np.logaddexp(0.0, used[:, c.harmonics :])
        return amps, gains

    def _band_profiles(self) -> np.ndarray:
        """[B, bins] inharmonic line clusters spread over 1-7 kHz.

        Each band is a fixed cluster of well-separated spectral lines rather
        than a flat block, so the emitted magnitudes stay realizable as an
        actual STFT and phase reconstruction of band content is consistent.
        Line positions and weights are frozen constants per band.
        """
        c = self.synth
        cfg = self.config
        bins = np.arange(cfg.bins, dtype=np.float64)
        hz_per_bin = cfg.sample_rate / cfg.fft_size
        profiles = np.zeros((max(c.noise_bands, 1), cfg.bins))
        for b in range(c.noise_bands):
            lo = 1000.0 + 6000.0 * b / c.noise_bands
            width = 6000.0 / c.noise_bands
            rng = np.random.default_rng(1000 + b)
            spacing_bins = 4.0
            n_lines = max(3, int(width / hz_per_bin / spacing_bins))
            centers = (lo / hz_per_bin
                       + spacing_bins * (np.arange(n_lines) + 0.5)
                       + rng.uniform(-1.0, 1.0, n_lines))
            envelope = 0.5 - 0.5 * np.cos(2 * np.pi * (np.arange(n_lines) + 0.5) / n_lines)
            weights = envelope * rng.uniform(0.6, 1.0, n_lines)
            weights /= np.sqrt(np.sum(weights**2))
            for pos, w in zip(centers, weights):
                profiles[b] += w * np.exp(-self._lobe_coeff * (bins - pos) ** 2)
        return profiles[: c.noise_bands]

    def spectrum_many(self, zs: np.ndarray, pitch: float) -> np.ndarray:
        """[n, bins] linear-magnitude spectral columns (time-constant)."""
        c = self.synth
        cfg = self.config
        amps, gains = self._mapped(np.atleast_2d(zs))
        f0 = midi_to_hz(pitch)
        bins = np.arange(cfg.bins, dtype=np.float64)
        mag = np.zeros((amps.shape[0], cfg.bins))
        for k in range(c.harmonics):
            fk = (k + 1) * f0
            if fk >= cfg.sample_rate / 2:
                break
            pos = fk * cfg.fft_size / cfg.sample_rate
            lobe = np.exp(-self._lobe_coeff * (bins - pos) ** 2)
            mag += np.outer(amps[:, k], lobe)
        mag *= c.amplitude * self._peak_scale
        if c.noise_bands:
            mag += (c.noise_level * self._peak_scale) * (gains @ self._band_profiles())
        return mag

    def log_columns(self, zs: np.ndarray, pitch: float) -> np.ndarray:
        """[n, bins] log-magnitude columns; the full spectrogram repeats them."""
        cols = self.spectrum_many(zs, pitch)
        return np.log(np.maximum(cols, math.exp(self.config.mag_floor))).astype(np.float32)

    def generate(self, z: np.ndarray, pitch: float) -> LogMagSpectrogram:
        values = self.log_columns(z[None, :], pitch)[0]
        return LogMagSpectrogram(
            np.repeat(values[:, None], self.frames, axis=1), self.config
        )

    def generate_many(self, zs: np.ndarray, pitch: float) -> np.ndarray:
        values = self.log_columns(zs, pitch)
        return np.repeat(values[:, :, None], self.frames, axis=2)


def builtin_synth(config: SynthConfig | None = None, **kwargs) -> HarmonicNoiseGenerator:
    """The deterministic desk-scale stand-in for a trained latent generator."""
    if config is None:
        config = SynthConfig(**kwargs)
    elif kwargs:
        raise ValueError("pass either a SynthConfig or keyword fields, not both")
    return HarmonicNoiseGenerator(config)


@dataclass
class SoundGrid:
    """Spectrograms, phase-reconstructed audio, and indexing parameters for
    every node of a rendered mesh (one pitch per grid)."""

    spectrograms: np.ndarray  # [R, R, bins, frames] float32
    audio: np.ndarray  # [R, R, samples] float32
    pitch: float
    config: StftConfig
    provenance: str = "builtin-synth"
    corners: list | None = None

    def __post_init__(self):
        if self.spectrograms.shape[:2] != self.audio.shape[:2]:
            raise ValueError("spectrogram and audio grids disagree on resolution")
        if self.spectrograms.shape[0] != self.spectrograms.shape[1]:
            raise ValueError("grid must be square")

    @property
    def resolution(self) -> int:
        return self.spectrograms.shape[0]

    def params(self, i: int, j: int) -> ControlParams:
        r = self.resolution
        if r == 1:
            return ControlParams(0.0, 0.0, self.pitch)
        return ControlParams(i / (r - 1), j / (r - 1), self.pitch)

    def cell_spectrogram(self, i: int, j: int) -> LogMagSpectrogram:
        return LogMagSpectrogram(self.spectrograms[i, j], self.config)

    def cell_audio(self, i: int, j: int) -> AudioClip:
        return AudioClip(self.audio[i, j], self.config.sample_rate)

    def cell_index(self, u: float, v: float) -> tuple[int, int]:
        r = self.resolution
        return int(round(u * (r - 1))), int(round(v * (r - 1)))


def render_grid(mesh: Mesh, gen: Generator, pitch: float, *, pghi_tol: float = 1e-6,
                seed: int = 0) -> SoundGrid:
    """Render every mesh node: spectrogram via the generator, audio via phase
    reconstruction.  Per-cell phase seeds derive from `seed` deterministically."""
    r = mesh.resolution
    flat = mesh.nodes.reshape(r * r, -1)
    specs = gen.generate_many(flat, pitch).reshape(r, r, gen.config.bins, gen.frames)
    specs = specs.astype(np.float32, copy=False)

    cell_seeds = np.random.SeedSequence(seed).generate_state(r * r)
    n_samples = (gen.frames - 1) * gen.config.hop
    audio = np.empty((r, r, n_samples), dtype=np.float32)
    for i in range(r):
        for j in range(r):
            spec = LogMagSpectrogram(specs[i, j], gen.config)
            try:
                clip = spectral.reconstruct(spec, tol=pghi_tol, seed=int(cell_seeds[i * r + j]))
            except Exception as exc:
                raise RuntimeError(f"rendering cell ({i}, {j}) failed: {exc}") from exc
            audio[i, j] = clip.samples
    return SoundGrid(
        spectrograms=specs,
        audio=audio,
        pitch=float(pitch),
        config=gen.config,
        provenance="builtin-synth",
        corners=[c.copy() for c in mesh.spec.corners],
    )
