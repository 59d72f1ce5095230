"""Train the sample-level performer on a rendered grid and play it.

Desk-scale demonstration: a small timbre grid at two pitches, a few thousand
training iterations, then generation with a live-style parameter schedule
(note steps and a pitch glide).  Expect a few minutes of CPU time.
"""

import time

import numpy as np

from soundmesh import gridio, latent as lt, performer as pf

gen = lt.builtin_synth(harmonics=3, noise_bands=0)
mesh = lt.build_mesh(lt.MeshSpec(lt.sample_latents(4, seed=5), resolution=3))
pitches = [64.0, 68.0, 71.0, 76.0]
grids = [lt.render_grid(mesh, gen, p, seed=int(p)) for p in pitches]
print(f"dataset: {sum(g.resolution ** 2 for g in grids)} one-second clips at "
      f"pitches {pitches}")

cfg = pf.RnnConfig(hidden_size=64, embed_size=64, pitch_range=(64.0, 76.0))
tcfg = pf.TrainConfig(seq_len=128, batch_size=16, iterations=4500,
                      learning_rate=2.5e-3, final_lr_fraction=0.03, seed=3)
weights = pf.init_model(cfg, seed=1)

t0 = time.perf_counter()
weights, curve = pf.train(weights, grids, tcfg,
                          callback=lambda it, loss: print(f"  iter {it}: {loss:.3f}")
                          if it % 500 == 0 else None)
print(f"trained {tcfg.iterations} iterations in {time.perf_counter() - t0:.0f} s; "
      f"loss {curve[0][1]:.2f} -> {curve[-1][1]:.2f} nats")

pf.save_checkpoint(weights, "demo_model.smfr")
print("checkpoint written to demo_model.smfr "
      f"({weights.param_count} parameters)")

# play a phrase: two held notes then a two-second downward glide
sched = pf.BreakpointSchedule(
    [(0, 0.2, 0.2, 64.0), (8000, 0.8, 0.8, 70.0), (16000, 0.5, 0.5, 76.0),
     (48000, 0.5, 0.5, 64.0)],
    modes=["hold", "hold", "glide", "hold"],
)
clip = pf.generate(weights, sched, n_samples=48000, seed=9, temperature=0.9)
gridio.write_wav("demo_performance.wav", clip)
print("wrote demo_performance.wav (3 s: two notes, then a one-octave glide)")
