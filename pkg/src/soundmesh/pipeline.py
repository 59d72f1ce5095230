"""End-to-end build pipeline: configuration, staged execution with
resumable artifacts, dataset ingestion, and latent audition.

Stages run in order (audition-latents, build-mesh, smooth, render-grid,
train-rnn, evaluate), each writing its artifacts under the run directory and
recording a content hash in the run manifest.  Re-running with an unchanged
configuration skips completed stages.  Every stage's random seed derives
deterministically from the master seed and the stage name, so a run is
byte-reproducible end to end.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluate as ev
from . import gridio, performer, smoothing, spectral
from .latent import (ControlParams, Mesh, MeshSpec, build_mesh, builtin_synth,
                     render_grid, sample_latents, SynthConfig)
from .performer import GridDataset, RnnConfig, TrainConfig
from .smoothing import SomConfig
from .spectral import StftConfig

STAGES = ("audition-latents", "build-mesh", "smooth", "render-grid", "train-rnn", "evaluate")


@dataclass
class PipelineConfig:
    master_seed: int
    out_dir: str
    stft: StftConfig
    generator: dict  # {"kind": "builtin", "synth": {...}} | {"kind": "imported", "path": ...}
    mesh: dict  # corner_seed/corner_scale or corners; resolution; pitch_set
    som: dict  # {"enabled": bool, "pitch": midi, ...SomConfig fields}
    rnn: RnnConfig
    train: TrainConfig
    eval: dict
    audition_count: int = 12

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        stft = StftConfig.from_dict(d.get("stft", {}))
        rnn = RnnConfig.from_dict(d.get("rnn", {}))
        train = TrainConfig.from_dict(d.get("train", {}))
        mesh = dict(d.get("mesh", {}))
        if "resolution" not in mesh:
            raise ValueError("config.mesh.resolution is required")
        if "pitch_set" not in mesh or not mesh["pitch_set"]:
            raise ValueError("config.mesh.pitch_set is required")
        if int(mesh["resolution"]) < 2:
            raise ValueError(f"mesh resolution must be >= 2, got {mesh['resolution']}")
        gen = dict(d.get("generator", {"kind": "builtin"}))
        if gen.get("kind") not in ("builtin", "imported"):
            raise ValueError(f"unknown generator kind {gen.get('kind')!r}")
        return cls(
            master_seed=int(d.get("master_seed", 0)),
            out_dir=str(d.get("out_dir", "run")),
            stft=stft,
            generator=gen,
            mesh=mesh,
            som=dict(d.get("som", {"enabled": False})),
            rnn=rnn,
            train=train,
            eval=dict(d.get("eval", {})),
            audition_count=int(d.get("audition", {}).get("count", 12)),
        )

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "out_dir": self.out_dir,
            "stft": self.stft.to_dict(),
            "generator": self.generator,
            "mesh": self.mesh,
            "som": self.som,
            "rnn": self.rnn.to_dict(),
            "train": self.train.to_dict(),
            "eval": self.eval,
            "audition": {"count": self.audition_count},
        }


def stage_seed(master_seed: int, stage: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def _config_hash(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _dump_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1))


class RunManifest:
    def __init__(self, path: Path):
        from . import __version__

        self.path = path
        if path.exists():
            self.data = json.loads(path.read_text())
        else:
            self.data = {"version": 1, "tool_version": __version__, "stages": {}}

    def stage_done(self, name: str, content_hash: str) -> bool:
        entry = self.data["stages"].get(name)
        if not entry or entry.get("status") != "done" or entry.get("hash") != content_hash:
            return False
        return all(Path(p).exists() for p in entry.get("artifacts", []))

    def record(self, name: str, content_hash: str, artifacts: list, elapsed: float,
               status: str = "done") -> None:
        self.data["stages"][name] = {
            "status": status,
            "hash": content_hash,
            "elapsed_s": round(elapsed, 3),
            "artifacts": [str(a) for a in artifacts],
        }
        self.save()

    def save(self) -> None:
        _dump_json(self.path, self.data)


def make_generator(cfg: PipelineConfig):
    if cfg.generator["kind"] == "builtin":
        synth = dict(cfg.generator.get("synth", {}))
        synth["stft"] = cfg.stft
        return builtin_synth(SynthConfig.from_dict({**synth, "stft": synth["stft"].to_dict()}))
    raise ValueError("imported-grid runs render nothing; grids come from the bundle path")


def resolve_corners(cfg: PipelineConfig, run_dir: Path) -> np.ndarray:
    mesh = cfg.mesh
    if "corners" in mesh and mesh["corners"] is not None:
        return np.asarray(mesh["corners"], dtype=np.float64)
    if "corner_indices" in mesh and mesh["corner_indices"] is not None:
        listing = json.loads((run_dir / "audition" / "latents.json").read_text())
        latents = np.asarray(listing["latents"], dtype=np.float64)
        return latents[list(mesh["corner_indices"])]
    seed = int(mesh.get("corner_seed", stage_seed(cfg.master_seed, "corners")))
    scale = float(mesh.get("corner_scale", 1.0))
    return sample_latents(4, seed=seed) * scale


class Pipeline:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.run_dir = Path(cfg.out_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(self.run_dir / "manifest.json")

    # -- stages -------------------------------------------------------------

    def stage_audition(self) -> list:
        cfg = self.cfg
        out = self.run_dir / "audition"
        seed = stage_seed(cfg.master_seed, "audition-latents")
        gen = make_generator(cfg)
        pitch = float(cfg.mesh["pitch_set"][0])
        return audition_latents(gen, cfg.audition_count, seed, out, pitch=pitch)

    def stage_build_mesh(self) -> list:
        cfg = self.cfg
        corners = resolve_corners(cfg, self.run_dir)
        spec = MeshSpec(corners, resolution=int(cfg.mesh["resolution"]),
                        pitch_set=tuple(cfg.mesh["pitch_set"]))
        path = self.run_dir / "mesh.json"
        _dump_json(path, {
            "corners": [c.tolist() for c in corners],
            "resolution": spec.resolution,
            "pitch_set": list(spec.pitch_set),
        })
        return [path]

    def _load_mesh(self, smoothed: bool) -> Mesh:
        name = "mesh_smoothed.json" if smoothed else "mesh.json"
        payload = json.loads((self.run_dir / name).read_text())
        spec = MeshSpec(np.asarray(payload["corners"]), resolution=payload["resolution"],
                        pitch_set=tuple(payload["pitch_set"]))
        mesh = build_mesh(spec)
        if "nodes" in payload:
            mesh = Mesh(np.asarray(payload["nodes"], dtype=np.float64), spec)
        return mesh

    def stage_smooth(self) -> list:
        cfg = self.cfg
        mesh = self._load_mesh(smoothed=False)
        som = dict(cfg.som)
        enabled = bool(som.pop("enabled", True))
        pitch = float(som.pop("pitch", cfg.mesh["pitch_set"][0]))
        out_mesh = self.run_dir / "mesh_smoothed.json"
        artifacts = [out_mesh]
        if not enabled:
            _dump_json(out_mesh, {
                "corners": [c.tolist() for c in mesh.spec.corners],
                "resolution": mesh.resolution,
                "pitch_set": list(mesh.spec.pitch_set),
                "nodes": mesh.nodes.tolist(),
                "smoothed": False,
            })
            return artifacts
        gen = make_generator(cfg)
        som_cfg = SomConfig.from_dict(som) if som else SomConfig()
        smoothed, report = smoothing.smooth(mesh, gen, pitch, som_cfg)
        _dump_json(out_mesh, {
            "corners": [c.tolist() for c in mesh.spec.corners],
            "resolution": mesh.resolution,
            "pitch_set": list(mesh.spec.pitch_set),
            "nodes": smoothed.nodes.tolist(),
            "smoothed": True,
        })
        report_path = self.run_dir / "adapt_report.json"
        report.to_json(report_path)
        pre_csv = self.run_dir / "diff_pre.csv"
        post_csv = self.run_dir / "diff_post.csv"
        pre_png = self.run_dir / "diff_pre.png"
        post_png = self.run_dir / "diff_post.png"
        report.initial_diff.to_csv(pre_csv)
        report.final_diff.to_csv(post_csv)
        report.initial_diff.to_png(pre_png)
        report.final_diff.to_png(post_png)
        return artifacts + [report_path, pre_csv, post_csv, pre_png, post_png]

    def stage_render(self) -> list:
        cfg = self.cfg
        gen = make_generator(cfg)
        mesh = self._load_mesh(smoothed=True)
        base_mesh = self._load_mesh(smoothed=False)
        seed = stage_seed(cfg.master_seed, "render-grid")
        artifacts = []
        for pitch in cfg.mesh["pitch_set"]:
            grid = render_grid(mesh, gen, float(pitch), seed=seed + int(round(pitch)))
            bundle = self.run_dir / f"grid_p{int(round(pitch))}"
            gridio.export_grid(grid, bundle, seed=seed)
            post = smoothing.neighbor_distances(grid)
            pre_grid = render_grid(base_mesh, gen, float(pitch), seed=seed + int(round(pitch)))
            pre = smoothing.neighbor_distances(pre_grid)
            _dump_json(bundle / "diff_pre.json", {"matrix": pre.to_list(), "max": pre.max_value})
            _dump_json(bundle / "diff_post.json", {"matrix": post.to_list(), "max": post.max_value})
            artifacts.append(bundle / "manifest.json")
        return artifacts

    def _load_grids(self) -> list:
        grids = []
        if self.cfg.generator["kind"] == "imported":
            root = Path(self.cfg.generator["path"])
            for bundle in sorted(root.glob("grid_p*")):
                grids.append(gridio.import_grid(bundle))
            if not grids:
                grids.append(gridio.import_grid(root))
            return grids
        for pitch in self.cfg.mesh["pitch_set"]:
            grids.append(gridio.import_grid(self.run_dir / f"grid_p{int(round(pitch))}"))
        return grids

    def stage_train(self) -> list:
        cfg = self.cfg
        grids = self._load_grids()
        data = GridDataset(grids, cfg.rnn)
        seed = stage_seed(cfg.master_seed, "train-rnn")
        tcfg = TrainConfig.from_dict({**cfg.train.to_dict(), "seed": seed})
        weights = performer.init_model(cfg.rnn, seed=seed)
        weights, curve = performer.train(weights, data, tcfg)
        model_path = self.run_dir / "model.smfr"
        performer.save_checkpoint(weights, model_path, train_config=tcfg)
        curve_path = self.run_dir / "loss_curve.json"
        _dump_json(curve_path, {"curve": [[int(i), float(l)] for i, l in curve]})
        return [model_path, curve_path]

    def stage_evaluate(self) -> list:
        cfg = self.cfg
        ecfg = cfg.eval
        seed = stage_seed(cfg.master_seed, "evaluate")
        weights, _ = performer.load_checkpoint(self.run_dir / "model.smfr")
        temperature = float(ecfg.get("temperature", 1.0))
        greedy = bool(ecfg.get("greedy", False))
        report: dict = {}

        pitches = [float(p) for p in cfg.mesh["pitch_set"]]
        prt_cfg = ecfg.get("prt", {})
        before = ControlParams(*prt_cfg.get("before", (0.5, 0.5, min(pitches))))
        after = ControlParams(*prt_cfg.get("after", (0.5, 0.5, max(pitches))))
        renderer = ev.ModelRenderer(weights, seed=seed, temperature=temperature,
                                    greedy=greedy)
        prt = ev.measure_prt(renderer, before, after, tol=float(prt_cfg.get("tol", 0.05)))
        report["prt"] = {
            "before": [before.u, before.v, before.pitch],
            "after": [after.u, after.v, after.pitch],
            "prt_samples": prt.prt,
            "settled": prt.settled,
            "measured_period_before": prt.measured_period_before,
            "measured_period_after": prt.measured_period_after,
        }

        _, glide_report = ev.arpeggio_glide_script(renderer)
        report["arpeggio_glide"] = glide_report

        tau = float(ecfg.get("tau", 100.0))
        grids = self._load_grids()
        mid_grid = grids[len(grids) // 2]
        cons = ev.consistency(mid_grid, weights, tau, seed=seed, greedy=greedy,
                              temperature=float(ecfg.get("consistency_temperature", temperature)))
        report["consistency"] = {"tau": tau, "fraction_within": cons.fraction_within}

        path_cfg = ecfg.get("path", {})
        steps = int(path_cfg.get("steps", 20))
        clip_dur = float(path_cfg.get("clip_dur", 0.7))
        gen = make_generator(cfg) if cfg.generator["kind"] == "builtin" else None
        artifacts = []
        if gen is not None:
            p_from = ControlParams(*path_cfg.get("from", (0.0, 0.0, pitches[0])))
            p_to = ControlParams(*path_cfg.get("to", (1.0, 1.0, pitches[0])))
            smoothed_src = ev.MeshPointSource(self._load_mesh(smoothed=True), gen)
            raw_src = ev.MeshPointSource(self._load_mesh(smoothed=False), gen)
            _, stim_s, rep_s = ev.render_path(smoothed_src, p_from, p_to, steps, clip_dur, seed=seed)
            _, stim_r, rep_r = ev.render_path(raw_src, p_from, p_to, steps, clip_dur, seed=seed)
            report["paths"] = {
                "smoothed": rep_s.to_dict(),
                "unsmoothed": rep_r.to_dict(),
                "stimulus_seconds": len(stim_s) / 16000,
            }
            sm_wav = self.run_dir / "path_smoothed.wav"
            raw_wav = self.run_dir / "path_unsmoothed.wav"
            gridio.write_wav(sm_wav, stim_s)
            gridio.write_wav(raw_wav, stim_r)
            artifacts += [sm_wav, raw_wav]

        report_path = self.run_dir / "eval_report.json"
        _dump_json(report_path, report)
        return [report_path] + artifacts

    # -- driver ---------------------------------------------------------------

    def _stage_hash(self, name: str) -> str:
        cfg = self.cfg.to_dict()
        relevant = {
            "audition-latents": ["master_seed", "stft", "generator", "audition", "mesh"],
            "build-mesh": ["master_seed", "stft", "mesh"],
            "smooth": ["master_seed", "stft", "generator", "mesh", "som"],
            "render-grid": ["master_seed", "stft", "generator", "mesh", "som"],
            "train-rnn": ["master_seed", "stft", "generator", "mesh", "som", "rnn", "train"],
            "evaluate": ["master_seed", "stft", "generator", "mesh", "som", "rnn", "train", "eval"],
        }[name]
        return _config_hash({k: cfg[k] for k in relevant})

    def run_stage(self, name: str, force: bool = False) -> dict:
        runner = {
            "audition-latents": self.stage_audition,
            "build-mesh": self.stage_build_mesh,
            "smooth": self.stage_smooth,
            "render-grid": self.stage_render,
            "train-rnn": self.stage_train,
            "evaluate": self.stage_evaluate,
        }[name]
        content_hash = self._stage_hash(name)
        if not force and self.manifest.stage_done(name, content_hash):
            return {"stage": name, "status": "skipped"}
        t0 = time.perf_counter()
        try:
            artifacts = runner()
        except Exception:
            self.manifest.record(name, content_hash, [], time.perf_counter() - t0,
                                 status="failed")
            raise
        self.manifest.record(name, content_hash, artifacts, time.perf_counter() - t0)
        return {"stage": name, "status": "done", "artifacts": [str(a) for a in artifacts]}

    def run(self, force: bool = False) -> list:
        results = []
        for name in STAGES:
            if name == "smooth" and self.cfg.generator["kind"] == "imported":
                continue  # smoothing needs a live generator
            if name in ("audition-latents", "build-mesh", "render-grid") \
                    and self.cfg.generator["kind"] == "imported":
                continue
            results.append(self.run_stage(name, force=force))
        return results


def run_pipeline(config: PipelineConfig, force: bool = False) -> list:
    return Pipeline(config).run(force=force)


def audition_latents(gen, count: int, seed: int, out_dir, pitch: float = 70.0,
                     pghi_tol: float = 1e-6) -> list:
    """Render `count` random-latent sounds for the designer to audition.

    Writes latent_<k>.wav plus latents.json so chosen indices can later seed
    mesh corners exactly.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    latents = sample_latents(count, seed=seed)
    artifacts = []
    for k in range(count):
        spec = gen.generate(latents[k], pitch)
        clip = spectral.reconstruct(spec, tol=pghi_tol, seed=seed + k)
        path = out_dir / f"latent_{k}.wav"
        gridio.write_wav(path, clip)
        artifacts.append(path)
    listing = out_dir / "latents.json"
    _dump_json(listing, {
        "seed": seed,
        "count": count,
        "pitch": pitch,
        "latents": [row.tolist() for row in latents],
    })
    return artifacts + [listing]


def ingest_dataset(directory) -> dict:
    """Validate a directory of mono 16 kHz WAVs with optional JSON sidecars.

    Non-conforming files are listed with reasons, never silently skipped.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ValueError(f"{directory}: not a directory")
    files = []
    errors = []
    pitch_histogram: dict = {}
    total = 0.0
    for path in sorted(directory.glob("*.wav")):
        try:
            clip = gridio.read_wav(path)
        except Exception as exc:
            errors.append({"file": path.name, "reason": str(exc)})
            continue
        if clip.sample_rate != 16000:
            errors.append({"file": path.name,
                           "reason": f"sample rate {clip.sample_rate}, expected 16000"})
            continue
        entry = {"file": path.name, "samples": len(clip),
                 "duration": round(clip.duration, 6)}
        sidecar = path.with_suffix(".json")
        if sidecar.exists():
            try:
                meta = json.loads(sidecar.read_text())
            except json.JSONDecodeError as exc:
                errors.append({"file": sidecar.name, "reason": f"bad JSON: {exc}"})
                meta = {}
            if "pitch" in meta:
                entry["pitch"] = float(meta["pitch"])
                key = str(int(round(entry["pitch"])))
                pitch_histogram[key] = pitch_histogram.get(key, 0) + 1
            if "tags" in meta:
                entry["tags"] = list(meta["tags"])
        total += clip.duration
        files.append(entry)
    durations = [f["duration"] for f in files]
    return {
        "count": len(files),
        "total_duration": round(total, 6),
        "duration_min": min(durations) if durations else 0.0,
        "duration_max": max(durations) if durations else 0.0,
        "pitch_histogram": pitch_histogram,
        "files": files,
        "errors": errors,
    }
