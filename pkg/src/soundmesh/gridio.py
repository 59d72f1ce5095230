"""File formats: mono WAV read/write, the SMF1 spectrogram container, and
sound-grid bundles (a directory of per-cell spectrograms and audio plus a
manifest).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .spectral import AudioClip, LogMagSpectrogram, StftConfig

SPEC_MAGIC = b"SMF1"


def write_wav(path, clip: AudioClip, fmt: str = "pcm16") -> None:
    """Write a mono WAV file, either PCM16 or float32."""
    path = Path(path)
    x = np.clip(clip.samples, -1.0, 1.0)
    if fmt == "pcm16":
        data = np.round(x * 32767.0).astype(np.int16)
    elif fmt == "float32":
        data = x.astype(np.float32)
    else:
        raise ValueError(f"unsupported wav format {fmt!r}")
    wavfile.write(path, clip.sample_rate, data)


def read_wav(path) -> AudioClip:
    """Read a mono WAV file (PCM16 or float32) into floats in [-1, 1]."""
    rate, data = wavfile.read(Path(path))
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono, got {data.ndim} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    else:
        raise ValueError(f"{path}: unsupported sample dtype {data.dtype}")
    return AudioClip(samples, rate)


def write_spectrogram(path, spec: LogMagSpectrogram) -> None:
    """SMF1 container: 16-byte header (magic, u32 bins, u32 frames, u32
    reserved) followed by row-major little-endian float32 values."""
    values = np.ascontiguousarray(spec.values, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(SPEC_MAGIC)
        fh.write(struct.pack("<III", values.shape[0], values.shape[1], 0))
        fh.write(values.tobytes())


def read_spectrogram(path, config: StftConfig | None = None) -> LogMagSpectrogram:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != SPEC_MAGIC:
        raise ValueError(f"{path}: not an SMF1 spectrogram file")
    bins, frames, _ = struct.unpack("<III", raw[4:16])
    expected = 16 + 4 * bins * frames
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {bins}x{frames}, got {len(raw)}")
    values = np.frombuffer(raw, dtype="<f4", offset=16).reshape(bins, frames)
    if config is None:
        config = StftConfig(fft_size=(bins - 1) * 2)
    return LogMagSpectrogram(values.copy(), config)


def export_grid(grid, path, seed: int | None = None) -> None:
    """Write a SoundGrid bundle: manifest.json + spec_i_j.smf1 + audio_i_j.wav."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    r = grid.resolution
    manifest = {
        "format": "soundmesh-grid-bundle",
        "version": 1,
        "resolution": r,
        "pitch_set": [grid.pitch],
        "stft": grid.config.to_dict(),
        "provenance": grid.provenance,
        "seed": seed,
        "corners": None if grid.corners is None else [c.tolist() for c in grid.corners],
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    for i in range(r):
        for j in range(r):
            write_spectrogram(path / f"spec_{i}_{j}.smf1", grid.cell_spectrogram(i, j))
            write_wav(path / f"audio_{i}_{j}.wav", grid.cell_audio(i, j), fmt="float32")


def import_grid(path):
    """Read a SoundGrid bundle back; all cells must be present and consistent."""
    from .latent import SoundGrid

    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise ValueError(f"{path}: missing manifest.json")
    manifest = json.loads(manifest_path.read_text())
    r = int(manifest["resolution"])
    cfg = StftConfig.from_dict(manifest["stft"])
    pitch = float(manifest["pitch_set"][0])

    spec_files = sorted(path.glob("spec_*.smf1"))
    if len(spec_files) != r * r:
        raise ValueError(
            f"{path}: manifest says resolution {r} ({r * r} cells) but found "
            f"{len(spec_files)} spectrogram files"
        )

    specs = None
    audio = None
    for i in range(r):
        for j in range(r):
            spath = path / f"spec_{i}_{j}.smf1"
            apath = path / f"audio_{i}_{j}.wav"
            if not spath.exists() or not apath.exists():
                raise ValueError(f"{path}: missing cell ({i}, {j})")
            spec = read_spectrogram(spath, cfg)
            clip = read_wav(apath)
            if specs is None:
                specs = np.empty((r, r) + spec.values.shape, dtype=np.float32)
                audio = np.empty((r, r, len(clip)), dtype=np.float32)
            if spec.values.shape != specs.shape[2:]:
                raise ValueError(
                    f"{path}: cell ({i}, {j}) spectrogram shape {spec.values.shape} "
                    f"!= {specs.shape[2:]}"
                )
            if len(clip) != audio.shape[2]:
                raise ValueError(f"{path}: cell ({i}, {j}) audio length mismatch")
            specs[i, j] = spec.values
            audio[i, j] = clip.samples
    corners = manifest.get("corners")
    if corners is not None:
        corners = [np.asarray(c, dtype=np.float64) for c in corners]
    return SoundGrid(
        spectrograms=specs,
        audio=audio,
        pitch=pitch,
        config=cfg,
        provenance="imported",
        corners=corners,
    )
