"""Mesh adaptation: move latent nodes so neighboring cells' sounds become
equally spaced under spectrogram distance, with corners pinned and (optional)
edge nodes constrained to their corner-to-corner segments.

The update attracts each free node toward neighbors whose sounds differ most:

    g_ij += delta * sum_{mn in N8} (g_mn - g_ij) * d(S_ij, S_mn) / d_mean

where d is the spectrogram L2 distance and d_mean is the mean over all
neighbor pairs of the mesh.  Updates are synchronous (computed from the
pre-step mesh), so results do not depend on traversal order.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .latent import Generator, Mesh, SoundGrid

_DIRECTIONS = ((0, 1), (1, 0), (1, 1), (1, -1))  # E, S, SE, SW cover all 8 via symmetry


@dataclass(frozen=True)
class SomConfig:
    step_size: float = 0.01
    max_iters: int = 500
    stop_eps: float = 1e-4
    pin_mode: str = "corners"
    neighborhood: int = 8
    # stop when the pair-distance CV has not improved for this many
    # iterations (the adapted mesh is kept at its best-CV snapshot); 0 runs
    # on displacement alone
    cv_patience: int = 25

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.pin_mode not in ("corners", "corners_and_edges"):
            raise ValueError(f"unknown pin_mode {self.pin_mode!r}")
        if self.neighborhood != 8:
            raise ValueError("only the 8-connected neighborhood is supported")
        if self.cv_patience < 0:
            raise ValueError("cv_patience must be >= 0")

    def to_dict(self) -> dict:
        return {
            "step_size": self.step_size,
            "max_iters": self.max_iters,
            "stop_eps": self.stop_eps,
            "pin_mode": self.pin_mode,
            "neighborhood": self.neighborhood,
            "cv_patience": self.cv_patience,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SomConfig":
        return cls(**d)


@dataclass
class DiffField:
    """Per-node mean spectrogram distance to its 8-connected neighbors."""

    mean_neighbor_distance: np.ndarray  # [R, C]
    max_value: float

    def to_csv(self, path) -> None:
        np.savetxt(path, self.mean_neighbor_distance, delimiter=",", fmt="%.6g")

    def to_png(self, path) -> None:
        write_gray_png(path, self.mean_neighbor_distance)

    def to_list(self) -> list:
        return [[float(x) for x in row] for row in self.mean_neighbor_distance]


@dataclass
class AdaptReport:
    iterations: int
    initial_diff: DiffField
    final_diff: DiffField
    initial_cv: float
    final_cv: float
    initial_max_pair: float
    final_max_pair: float
    displacements: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "initial_cv": self.initial_cv,
            "final_cv": self.final_cv,
            "initial_max_pair": self.initial_max_pair,
            "final_max_pair": self.final_max_pair,
            "displacements": [float(d) for d in self.displacements],
            "initial_diff": self.initial_diff.to_list(),
            "final_diff": self.final_diff.to_list(),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)


def _flat_specs(specs: np.ndarray) -> np.ndarray:
    r, c = specs.shape[:2]
    return specs.reshape(r, c, -1)


def pair_distances(specs: np.ndarray) -> dict:
    """Distances for the four unique neighbor directions.

    specs: [R, C, ...] spectrogram array.  Returns {(di, dj): [r, c] float64}
    where entry (i, j) is the distance between node (i, j) and (i+di, j+dj).
    """
    flat = _flat_specs(specs)
    out = {}
    for di, dj in _DIRECTIONS:
        a = flat[: flat.shape[0] - di, max(0, -dj) : flat.shape[1] - max(0, dj)]
        b = flat[di:, max(0, dj) : flat.shape[1] - max(0, -dj)]
        diff = a.astype(np.float64) - b.astype(np.float64)
        out[(di, dj)] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def all_pair_values(dists: dict) -> np.ndarray:
    return np.concatenate([d.ravel() for d in dists.values()])


def field_from_distances(dists: dict, shape: tuple) -> DiffField:
    sums = np.zeros(shape)
    counts = np.zeros(shape)
    r, c = shape
    for (di, dj), d in dists.items():
        sl_a = (slice(0, r - di), slice(max(0, -dj), c - max(0, dj)))
        sl_b = (slice(di, r), slice(max(0, dj), c - max(0, -dj)))
        sums[sl_a] += d
        counts[sl_a] += 1
        sums[sl_b] += d
        counts[sl_b] += 1
    mean = sums / counts
    return DiffField(mean, float(mean.max()))


def neighbor_distances(grid: SoundGrid) -> DiffField:
    """Mean spectrogram distance of every cell to its 8 neighbors."""
    dists = pair_distances(grid.spectrograms)
    return field_from_distances(dists, grid.spectrograms.shape[:2])


def adapt_step(nodes: np.ndarray, specs: np.ndarray, step_size: float,
               free_mask: np.ndarray) -> tuple[np.ndarray, float]:
    """One synchronous attraction update on a node field of any [R, C] shape.

    Returns (new nodes, mean displacement over free nodes).  Pure array math;
    constraints and re-rendering are the caller's job.
    """
    dists = pair_distances(specs)
    values = all_pair_values(dists)
    d_mean = float(values.mean()) if values.size else 0.0
    if d_mean <= 0.0:
        return nodes.copy(), 0.0

    r, c = nodes.shape[:2]
    update = np.zeros_like(nodes, dtype=np.float64)
    for (di, dj), d in dists.items():
        sl_a = (slice(0, r - di), slice(max(0, -dj), c - max(0, dj)))
        sl_b = (slice(di, r), slice(max(0, dj), c - max(0, -dj)))
        pull = (nodes[sl_b] - nodes[sl_a]) * d[..., None]
        update[sl_a] += pull
        update[sl_b] -= pull

    if not np.all(np.isfinite(update)):
        raise RuntimeError("non-finite SOM update; aborting iteration")
    new_nodes = nodes + np.where(free_mask[..., None], (step_size / d_mean) * update, 0.0)
    moved = np.linalg.norm((new_nodes - nodes).reshape(r * c, -1), axis=1)
    mean_disp = float(moved[free_mask.ravel()].mean()) if free_mask.any() else 0.0
    return new_nodes, mean_disp


def _free_mask(r: int, pin_mode: str) -> np.ndarray:
    mask = np.ones((r, r), dtype=bool)
    mask[0, 0] = mask[r - 1, 0] = mask[0, r - 1] = mask[r - 1, r - 1] = False
    return mask


def _project_edges(nodes: np.ndarray, corners: np.ndarray) -> None:
    """Orthogonally project boundary nodes onto their corner segments."""
    r = nodes.shape[0]
    z00, z10, z01, z11 = corners
    edges = (
        ((0, slice(1, r - 1)), z00, z01),  # top row runs z00 -> z01
        ((r - 1, slice(1, r - 1)), z10, z11),
        ((slice(1, r - 1), 0), z00, z10),
        ((slice(1, r - 1), r - 1), z01, z11),
    )
    for idx, a, b in edges:
        seg = b - a
        denom = float(seg @ seg)
        pts = nodes[idx]
        t = np.clip((pts - a) @ seg / denom, 0.0, 1.0)
        nodes[idx] = a + t[:, None] * seg


def _apply_constraints(nodes: np.ndarray, mesh: Mesh, cfg: SomConfig) -> None:
    r = mesh.resolution
    corners = mesh.spec.corners
    nodes[0, 0] = corners[0]
    nodes[r - 1, 0] = corners[1]
    nodes[0, r - 1] = corners[2]
    nodes[r - 1, r - 1] = corners[3]
    if cfg.pin_mode == "corners_and_edges":
        _project_edges(nodes, corners)


def som_step(mesh: Mesh, gen: Generator, pitch: float, cfg: SomConfig,
             specs: np.ndarray | None = None) -> tuple[Mesh, float]:
    """One smoothing step on a square mesh; renders node spectrograms if not
    supplied.  Corners are restored exactly after the update."""
    r = mesh.resolution
    if specs is None:
        specs = gen.generate_many(mesh.nodes.reshape(r * r, -1), pitch).reshape(
            r, r, gen.config.bins, gen.frames)
    new_nodes, disp = adapt_step(mesh.nodes, specs, cfg.step_size, _free_mask(r, cfg.pin_mode))
    _apply_constraints(new_nodes, mesh, cfg)
    return Mesh(new_nodes, mesh.spec), disp


def smooth(mesh: Mesh, gen: Generator, pitch: float,
           cfg: SomConfig | None = None) -> tuple[Mesh, AdaptReport]:
    """Iterate som_step until the mean displacement falls below stop_eps or
    max_iters is reached; reports initial/final difference statistics.

    Generators whose spectrograms are constant over frames (they expose
    log_columns) are adapted on single columns: the update only sees distance
    ratios d / d_mean, which are identical either way, and reported distances
    are rescaled by sqrt(frames) back to full-spectrogram units.
    """
    cfg = cfg or SomConfig()
    r = mesh.resolution
    free = _free_mask(r, cfg.pin_mode)

    columnar = hasattr(gen, "log_columns")
    scale = math.sqrt(gen.frames) if columnar else 1.0

    def render(zs):
        if columnar:
            return gen.log_columns(zs, pitch)
        return gen.generate_many(zs, pitch)

    def stats(specs):
        dists = pair_distances(specs)
        values = all_pair_values(dists) * scale
        diff = field_from_distances(dists, (r, r))
        diff = DiffField(diff.mean_neighbor_distance * scale, diff.max_value * scale)
        cv = float(values.std() / values.mean()) if values.mean() > 0 else 0.0
        vmax = float(values.max()) if values.size else 0.0
        return diff, cv, vmax

    nodes = mesh.nodes.copy()
    specs = render(nodes.reshape(r * r, -1)).reshape((r, r) + render(nodes[:1, 0]).shape[1:])
    initial_diff, initial_cv, initial_max = stats(specs)

    def current_cv():
        values = all_pair_values(pair_distances(specs))
        return float(values.std() / values.mean()) if values.mean() > 0 else 0.0

    displacements = []
    iterations = 0
    best_cv = current_cv()
    best_nodes = nodes.copy()
    best_specs = specs.copy()
    stall = 0
    for it in range(cfg.max_iters):
        new_nodes, disp = adapt_step(nodes, specs, cfg.step_size, free)
        _apply_constraints(new_nodes, Mesh(nodes, mesh.spec), cfg)
        moved = np.any(new_nodes != nodes, axis=2)
        nodes = new_nodes
        if moved.any():
            specs[moved] = render(nodes[moved]).astype(specs.dtype, copy=False)
        displacements.append(disp)
        iterations = it + 1
        if disp < cfg.stop_eps:
            break
        if cfg.cv_patience:
            cv_now = current_cv()
            if cv_now < best_cv * (1.0 - 1e-3):
                best_cv = cv_now
                best_nodes = nodes.copy()
                best_specs = specs.copy()
                stall = 0
            else:
                stall += 1
                if stall >= cfg.cv_patience:
                    nodes = best_nodes
                    specs = best_specs
                    break

    final_diff, final_cv, final_max = stats(specs)
    report = AdaptReport(
        iterations=iterations,
        initial_diff=initial_diff,
        final_diff=final_diff,
        initial_cv=initial_cv,
        final_cv=final_cv,
        initial_max_pair=initial_max,
        final_max_pair=final_max,
        displacements=displacements,
    )
    return Mesh(nodes, mesh.spec), report


def write_gray_png(path, values: np.ndarray) -> None:
    """8-bit grayscale PNG of a 2-D array, scaled to its own [min, max]."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    img = np.round((values - lo) * scale).astype(np.uint8)
    height, width = img.shape

    def chunk(tag: bytes, payload: bytes) -> bytes:
        raw = tag + payload
        return struct.pack(">I", len(payload)) + raw + struct.pack(">I", zlib.crc32(raw))

    ihdr = struct.pack(">IIBBBBB", width, height, 8, 0, 0, 0, 0)
    rows = b"".join(b"\x00" + img[y].tobytes() for y in range(height))
    data = (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr)
            + chunk(b"IDAT", zlib.compress(rows, 9)) + chunk(b"IEND", b""))
    with open(path, "wb") as fh:
        fh.write(data)
