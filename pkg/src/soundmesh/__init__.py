"""soundmesh: playable sound models from a 2D mesh over a latent sound space.

The pieces, in pipeline order: a spectral codec (STFT analysis, phase
reconstruction, resynthesis), a latent mesh spanned by four corner vectors
and rendered to a sound grid, a self-organizing smoother that equalizes how
fast the sound changes across the mesh, a sample-level recurrent performer
trained on the grid, an evaluation harness, and a live performance service.
"""

__version__ = "0.1.0"

from .latent import (ControlParams, Mesh, MeshSpec, SoundGrid, SynthConfig,
                     bilinear_latent, build_mesh, builtin_synth, render_grid,
                     sample_latents)
from .performer import (BreakpointSchedule, ConstantSchedule, GenSession, RnnConfig,
                        RnnWeights, TrainConfig, generate, init_model, load_checkpoint,
                        save_checkpoint, train)
from .smoothing import AdaptReport, DiffField, SomConfig, neighbor_distances, smooth
from .spectral import (AudioClip, LogMagSpectrogram, PhaseField, StftConfig, analyze,
                       mulaw_decode, mulaw_encode, pghi_phase, reconstruct,
                       spec_distance, spectral_convergence, stft, synthesize)

__all__ = [
    "AudioClip", "LogMagSpectrogram", "PhaseField", "StftConfig",
    "analyze", "synthesize", "stft", "pghi_phase", "reconstruct",
    "spectral_convergence", "mulaw_encode", "mulaw_decode", "spec_distance",
    "ControlParams", "MeshSpec", "Mesh", "SoundGrid", "SynthConfig",
    "sample_latents", "bilinear_latent", "build_mesh", "builtin_synth", "render_grid",
    "SomConfig", "DiffField", "AdaptReport", "neighbor_distances", "smooth",
    "RnnConfig", "TrainConfig", "RnnWeights", "GenSession",
    "init_model", "train", "generate", "save_checkpoint", "load_checkpoint",
    "ConstantSchedule", "BreakpointSchedule",
]
