"""Shared fixtures and the acceptance summary reporter."""

import numpy as np
import pytest

ACCEPTANCE_RESULTS = {}


def record_acceptance(key: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS[key] = (passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[key]
        status = "PASS" if passed else "FAIL"
        line = f"{status}  {key}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def desk_model():
    """The desk-scale trained model shared by the acceptance criteria.

    3x3 timbre grid of harmonic tones rendered at five pitches spanning the
    model's MIDI 64..76 range; hidden size 64, <= 20k iterations.
    """
    import time

    from soundmesh import latent as lt, performer as pf

    t0 = time.perf_counter()
    gen = lt.builtin_synth(harmonics=3, noise_bands=0)
    mesh = lt.build_mesh(lt.MeshSpec(lt.sample_latents(4, seed=5), resolution=3))
    pitches = [64.0, 68.0, 70.0, 73.0, 76.0]
    grids = [lt.render_grid(mesh, gen, p, seed=7 + int(p)) for p in pitches]

    cfg = pf.RnnConfig(hidden_size=64, embed_size=64, pitch_range=(64.0, 76.0))
    tcfg = pf.TrainConfig(seq_len=128, batch_size=16, iterations=12_000,
                          learning_rate=2.5e-3, final_lr_fraction=0.02, seed=3)
    weights = pf.init_model(cfg, seed=1)
    weights, curve = pf.train(weights, grids, tcfg)
    elapsed = time.perf_counter() - t0
    return {
        "weights": weights,
        "config": cfg,
        "train_config": tcfg,
        "grids": grids,
        "mesh": mesh,
        "generator": gen,
        "pitches": pitches,
        "loss_curve": curve,
        "train_seconds": elapsed,
    }
