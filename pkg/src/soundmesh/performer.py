"""The performer: a sample-level conditional GRU stack that emits one mu-law
audio class per step, trained by teacher forcing on sound-grid audio and able
to run indefinitely with per-sample parameter control.

Layout: a linear embedding takes [prev_sample, u, v, pitch_norm] to the first
GRU layer's input; each layer uses the classic single-bias gate equations

    z = sigmoid(x W_z + h U_z + b_z)
    r = sigmoid(x W_r + h U_r + b_r)
    n = tanh(x W_n + (r * h) U_n + b_n)
    h' = (1 - z) * h + z * n

and a final affine layer produces 256 logits.  Training is plain BPTT with
adaptive moment estimation and global-norm gradient clipping.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .latent import ControlParams
from .spectral import AudioClip, mulaw_decode, mulaw_encode

CHECKPOINT_MAGIC = b"SMFR"
CHECKPOINT_VERSION = 1
GUMBEL_BLOCK = 256


@dataclass(frozen=True)
class RnnConfig:
    gru_layers: int = 3
    hidden_size: int = 256
    embed_size: int = 64
    output_levels: int = 256
    param_dims: int = 3
    pitch_range: tuple = (64.0, 76.0)

    def __post_init__(self):
        if self.gru_layers < 1:
            raise ValueError(f"gru_layers must be >= 1, got {self.gru_layers}")
        if min(self.hidden_size, self.embed_size, self.param_dims) < 1:
            raise ValueError("all sizes must be positive")
        if self.output_levels != 256:
            raise ValueError("output_levels is fixed at 256 (mu-law classes)")
        object.__setattr__(self, "pitch_range", tuple(float(p) for p in self.pitch_range))

    @property
    def input_dims(self) -> int:
        return 1 + self.param_dims

    def pitch_norm(self, midi: float) -> float:
        lo, hi = self.pitch_range
        return min(1.0, max(0.0, (midi - lo) / (hi - lo)))

    def to_dict(self) -> dict:
        return {
            "gru_layers": self.gru_layers,
            "hidden_size": self.hidden_size,
            "embed_size": self.embed_size,
            "output_levels": self.output_levels,
            "param_dims": self.param_dims,
            "pitch_range": list(self.pitch_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RnnConfig":
        d = dict(d)
        if "pitch_range" in d:
            d["pitch_range"] = tuple(d["pitch_range"])
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    seq_len: int = 256
    batch_size: int = 128
    iterations: int = 100_000
    learning_rate: float = 1e-3
    clip_norm: float = 1.0
    seed: int = 0
    log_every: int = 100
    final_lr_fraction: float = 1.0  # cosine decay floor; 1.0 = constant rate

    def __post_init__(self):
        if self.seq_len < 2:
            raise ValueError(f"seq_len must be >= 2, got {self.seq_len}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 < self.final_lr_fraction <= 1.0):
            raise ValueError("final_lr_fraction must lie in (0, 1]")

    def rate_at(self, it: int) -> float:
        if self.final_lr_fraction >= 1.0 or self.iterations <= 1:
            return self.learning_rate
        frac = self.final_lr_fraction
        cos = 0.5 * (1.0 + math.cos(math.pi * it / (self.iterations - 1)))
        return self.learning_rate * (frac + (1.0 - frac) * cos)

    def to_dict(self) -> dict:
        return {
            "seq_len": self.seq_len,
            "batch_size": self.batch_size,
            "iterations": self.iterations,
            "learning_rate": self.learning_rate,
            "clip_norm": self.clip_norm,
            "seed": self.seed,
            "log_every": self.log_every,
            "final_lr_fraction": self.final_lr_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class LayerWeights:
    w_x: np.ndarray  # [in, 3H], gate order z | r | n
    b: np.ndarray  # [3H]
    u_zr: np.ndarray  # [H, 2H]
    u_n: np.ndarray  # [H, H]


@dataclass
class RnnWeights:
    config: RnnConfig
    w_embed: np.ndarray  # [1 + param_dims, E]
    b_embed: np.ndarray  # [E]
    layers: list  # list[LayerWeights]
    w_out: np.ndarray  # [H, 256]
    b_out: np.ndarray  # [256]

    def param_list(self) -> list[np.ndarray]:
        """All tensors in the declared (checkpoint) order."""
        out = [self.w_embed, self.b_embed]
        for lay in self.layers:
            out.extend([lay.w_x, lay.b, lay.u_zr, lay.u_n])
        out.extend([self.w_out, self.b_out])
        return out

    def param_names(self) -> list[str]:
        names = ["embed.w", "embed.b"]
        for i in range(len(self.layers)):
            names.extend([f"gru{i}.w_x", f"gru{i}.b", f"gru{i}.u_zr", f"gru{i}.u_n"])
        names.extend(["out.w", "out.b"])
        return names

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.param_list())

    @property
    def dtype(self):
        return self.w_embed.dtype

    def validate(self, cfg: RnnConfig | None = None) -> None:
        cfg = cfg or self.config
        h, e = cfg.hidden_size, cfg.embed_size
        if cfg.gru_layers != len(self.layers):
            raise ValueError(f"config expects {cfg.gru_layers} layers, weights have {len(self.layers)}")
        if self.w_embed.shape != (cfg.input_dims, e):
            raise ValueError(f"embed shape {self.w_embed.shape} != {(cfg.input_dims, e)}")
        for i, lay in enumerate(self.layers):
            d_in = e if i == 0 else h
            if lay.w_x.shape != (d_in, 3 * h) or lay.u_zr.shape != (h, 2 * h) \
                    or lay.u_n.shape != (h, h) or lay.b.shape != (3 * h,):
                raise ValueError(f"layer {i} weight shapes inconsistent with config {cfg}")
        if self.w_out.shape != (h, cfg.output_levels):
            raise ValueError(f"output shape {self.w_out.shape} != {(h, cfg.output_levels)}")
        for name, p in zip(self.param_names(), self.param_list()):
            if not np.all(np.isfinite(p)):
                raise ValueError(f"non-finite values in {name}")

    def copy(self) -> "RnnWeights":
        return RnnWeights(
            config=self.config,
            w_embed=self.w_embed.copy(),
            b_embed=self.b_embed.copy(),
            layers=[LayerWeights(l.w_x.copy(), l.b.copy(), l.u_zr.copy(), l.u_n.copy())
                    for l in self.layers],
            w_out=self.w_out.copy(),
            b_out=self.b_out.copy(),
        )


def parameter_count(cfg: RnnConfig) -> int:
    """Closed-form parameter count from the declared shapes."""
    h, e = cfg.hidden_size, cfg.embed_size
    total = cfg.input_dims * e + e
    for i in range(cfg.gru_layers):
        d_in = e if i == 0 else h
        total += 3 * (d_in * h + h * h + h)
    total += h * cfg.output_levels + cfg.output_levels
    return total


def init_model(cfg: RnnConfig, seed: int, dtype=np.float32) -> RnnWeights:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) matrices, zero biases."""
    rng = np.random.default_rng(seed)

    def mat(fan_in, *shape):
        s = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-s, s, size=shape).astype(dtype)

    h, e = cfg.hidden_size, cfg.embed_size
    layers = []
    for i in range(cfg.gru_layers):
        d_in = e if i == 0 else h
        layers.append(LayerWeights(
            w_x=mat(d_in, d_in, 3 * h),
            b=np.zeros(3 * h, dtype=dtype),
            u_zr=mat(h, h, 2 * h),
            u_n=mat(h, h, h),
        ))
    return RnnWeights(
        config=cfg,
        w_embed=mat(cfg.input_dims, cfg.input_dims, e),
        b_embed=np.zeros(e, dtype=dtype),
        layers=layers,
        w_out=mat(h, h, cfg.output_levels),
        b_out=np.zeros(cfg.output_levels, dtype=dtype),
    )


# ---------------------------------------------------------------------------
# batched training path

def _forward_batch(w: RnnWeights, in_float: np.ndarray, params_norm: np.ndarray):
    """Teacher-forced forward pass.

    in_float: [B, L] previous samples; params_norm: [B, 3] (u, v, pitch_norm).
    Returns (logits [L, B, 256], caches) with everything needed for backprop.
    """
    cfg = w.config
    dt = w.dtype
    b_sz, seq = in_float.shape
    h_dim, n_layers = cfg.hidden_size, cfg.gru_layers

    in_arr = np.empty((seq, b_sz, cfg.input_dims), dtype=dt)
    in_arr[:, :, 0] = in_float.T
    in_arr[:, :, 1:] = params_norm[None, :, :]
    embeds = (in_arr.reshape(seq * b_sz, -1) @ w.w_embed + w.b_embed).reshape(seq, b_sz, -1)

    h_prev = np.zeros((n_layers, seq, b_sz, h_dim), dtype=dt)  # state entering step t
    zs = np.empty_like(h_prev)
    rs = np.empty_like(h_prev)
    ns = np.empty_like(h_prev)
    rhs = np.empty_like(h_prev)
    h_out = np.empty_like(h_prev)  # state after step t

    x_stack = embeds
    for l, lay in enumerate(w.layers):
        gi = (x_stack.reshape(seq * b_sz, -1) @ lay.w_x + lay.b).reshape(seq, b_sz, -1)
        h = np.zeros((b_sz, h_dim), dtype=dt)
        for t in range(seq):
            h_prev[l, t] = h
            zr = expit(gi[t, :, : 2 * h_dim] + h @ lay.u_zr)
            z, r = zr[:, :h_dim], zr[:, h_dim:]
            rh = r * h
            n = np.tanh(gi[t, :, 2 * h_dim :] + rh @ lay.u_n)
            h = h + z * (n - h)
            zs[l, t], rs[l, t], ns[l, t], rhs[l, t] = z, r, n, rh
            h_out[l, t] = h
        x_stack = h_out[l]

    logits = (h_out[-1].reshape(seq * b_sz, -1) @ w.w_out + w.b_out).reshape(seq, b_sz, -1)
    caches = dict(in_arr=in_arr, embeds=embeds, h_prev=h_prev, zs=zs, rs=rs, ns=ns,
                  rhs=rhs, h_out=h_out)
    return logits, caches


def loss_and_grads(w: RnnWeights, in_float: np.ndarray, params_norm: np.ndarray,
                   targets: np.ndarray):
    """Mean next-sample cross-entropy (nats) and gradients in param order."""
    cfg = w.config
    dt = w.dtype
    b_sz, seq = in_float.shape
    h_dim = cfg.hidden_size
    logits, c = _forward_batch(w, in_float, params_norm)

    flat = logits.reshape(seq * b_sz, -1).astype(np.float64)
    flat -= flat.max(axis=1, keepdims=True)
    expf = np.exp(flat)
    probs = expf / expf.sum(axis=1, keepdims=True)
    tgt = targets.T.reshape(-1)
    idx = np.arange(seq * b_sz)
    loss = float(-np.mean(np.log(probs[idx, tgt] + 1e-300)))

    dlogits = probs
    dlogits[idx, tgt] -= 1.0
    dlogits /= seq * b_sz
    dlogits = dlogits.astype(dt)

    g_w_out = c["h_out"][-1].reshape(seq * b_sz, -1).T @ dlogits
    g_b_out = dlogits.sum(axis=0)
    dx_above = (dlogits @ w.w_out.T).reshape(seq, b_sz, h_dim)

    layer_grads = []
    for l in range(cfg.gru_layers - 1, -1, -1):
        lay = w.layers[l]
        z, r, n = c["zs"][l], c["rs"][l], c["ns"][l]
        h_prev, rh = c["h_prev"][l], c["rhs"][l]
        da_all = np.empty((seq, b_sz, 3 * h_dim), dtype=dt)
        dh = np.zeros((b_sz, h_dim), dtype=dt)
        for t in range(seq - 1, -1, -1):
            dh = dh + dx_above[t]
            zt, rt, nt, ht, rht = z[t], r[t], n[t], h_prev[t], rh[t]
            dz = dh * (nt - ht)
            dn = dh * zt
            dh_next = dh * (1.0 - zt)
            da_n = dn * (1.0 - nt * nt)
            drh = da_n @ lay.u_n.T
            dr = drh * ht
            dh_next = dh_next + drh * rt
            da_z = dz * zt * (1.0 - zt)
            da_r = dr * rt * (1.0 - rt)
            da_all[t, :, :h_dim] = da_z
            da_all[t, :, h_dim : 2 * h_dim] = da_r
            da_all[t, :, 2 * h_dim :] = da_n
            dh_next = dh_next + da_all[t, :, : 2 * h_dim] @ lay.u_zr.T
            dh = dh_next
        x_stack = c["embeds"] if l == 0 else c["h_out"][l - 1]
        flat_da = da_all.reshape(seq * b_sz, -1)
        g_w_x = x_stack.reshape(seq * b_sz, -1).T @ flat_da
        g_b = flat_da.sum(axis=0)
        g_u_zr = c["h_prev"][l].reshape(seq * b_sz, -1).T @ flat_da[:, : 2 * h_dim]
        g_u_n = c["rhs"][l].reshape(seq * b_sz, -1).T @ flat_da[:, 2 * h_dim :]
        layer_grads.append([g_w_x, g_b, g_u_zr, g_u_n])
        dx_above = (flat_da @ lay.w_x.T).reshape(seq, b_sz, -1)

    dembed = dx_above.reshape(seq * b_sz, -1)
    g_w_embed = c["in_arr"].reshape(seq * b_sz, -1).T @ dembed
    g_b_embed = dembed.sum(axis=0)

    grads = [g_w_embed, g_b_embed]
    for lg in reversed(layer_grads):
        grads.extend(lg)
    grads.extend([g_w_out, g_b_out])
    return loss, grads


class GridDataset:
    """Flattened training windows from one or more sound grids.

    Each cell contributes its mu-law quantized audio (the float fed to the
    model is the decoded quantized value, matching what generation feeds
    back) and its constant (u, v, pitch_norm) conditioning row.
    """

    def __init__(self, grids, cfg: RnnConfig):
        if hasattr(grids, "resolution"):
            grids = [grids]
        grids = list(grids)
        if not grids:
            raise ValueError("no grids supplied")
        clips, classes, params = [], [], []
        for grid in grids:
            r = grid.resolution
            for i in range(r):
                for j in range(r):
                    audio = grid.audio[i, j]
                    codes = mulaw_encode(np.asarray(audio, dtype=np.float64))
                    clips.append(mulaw_decode(codes).astype(np.float32))
                    classes.append(codes.astype(np.int16))
                    p = grid.params(i, j)
                    params.append([p.u, p.v, cfg.pitch_norm(p.pitch)])
        lengths = {len(cl) for cl in clips}
        if len(lengths) != 1:
            raise ValueError("all grid cells must share one clip length")
        self.audio = np.stack(clips)
        self.classes = np.stack(classes)
        self.params = np.asarray(params, dtype=np.float32)
        self.clip_len = self.audio.shape[1]

    @property
    def n_cells(self) -> int:
        return self.audio.shape[0]

    def sample_batch(self, rng: np.random.Generator, batch: int, seq: int):
        if self.clip_len < seq + 1:
            raise ValueError(f"clips of {self.clip_len} samples are too short for seq_len {seq}")
        cells = rng.integers(0, self.n_cells, size=batch)
        offs = rng.integers(0, self.clip_len - seq - 1, size=batch)
        idx = offs[:, None] + np.arange(seq + 1)[None, :]
        windows = self.audio[cells[:, None], idx]
        targets = self.classes[cells[:, None], idx[:, 1:]].astype(np.int64)
        return windows[:, :-1], self.params[cells], targets


def train(weights: RnnWeights, grids, tcfg: TrainConfig, *, callback=None):
    """Teacher-forced training; returns (new weights, loss curve).

    The loss curve is a list of (iteration, loss) pairs recorded every
    `log_every` iterations (iteration 0 reflects fresh weights).  A NaN loss
    aborts with diagnostics rather than continuing silently.
    """
    w = weights.copy()
    data = grids if isinstance(grids, GridDataset) else GridDataset(grids, w.config)
    rng = np.random.default_rng(tcfg.seed)
    params = w.param_list()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    curve = []

    for it in range(tcfg.iterations):
        in_float, cond, targets = data.sample_batch(rng, tcfg.batch_size, tcfg.seq_len)
        loss, grads = loss_and_grads(w, in_float, cond, targets)
        if not math.isfinite(loss):
            raise RuntimeError(
                f"training diverged: non-finite loss at iteration {it} "
                f"(lr={tcfg.learning_rate}, clip={tcfg.clip_norm})"
            )
        if it % tcfg.log_every == 0:
            curve.append((it, loss))
            if callback is not None:
                callback(it, loss)

        gnorm = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads))
        if tcfg.clip_norm > 0 and gnorm > tcfg.clip_norm:
            scale = tcfg.clip_norm / gnorm
            for g in grads:
                g *= scale
        t_adam = it + 1
        bc1 = 1.0 - beta1**t_adam
        bc2 = 1.0 - beta2**t_adam
        lr = tcfg.rate_at(it)
        for p, g, mi, vi in zip(params, grads, m, v):
            mi *= beta1
            mi += (1 - beta1) * g
            vi *= beta2
            vi += (1 - beta2) * g * g
            p -= (lr * (mi / bc1) / (np.sqrt(vi / bc2) + eps)).astype(p.dtype)

    if tcfg.iterations:
        in_float, cond, targets = data.sample_batch(rng, tcfg.batch_size, tcfg.seq_len)
        loss, _ = loss_and_grads(w, in_float, cond, targets)
        curve.append((tcfg.iterations, loss))
    return w, curve


# ---------------------------------------------------------------------------
# generation path

DECODE_TABLE = mulaw_decode(np.arange(256)).astype(np.float32)


@dataclass
class GenState:
    """Streaming state of one generation session."""

    hidden: list  # per-layer [H] float32
    prev_sample: float
    rng: np.random.Generator
    gumbel: np.ndarray | None = None
    gumbel_pos: int = GUMBEL_BLOCK
    samples_done: int = 0

    def copy(self) -> "GenState":
        rng = np.random.Generator(type(self.rng.bit_generator)())
        rng.bit_generator.state = self.rng.bit_generator.state
        return GenState(
            hidden=[h.copy() for h in self.hidden],
            prev_sample=self.prev_sample,
            rng=rng,
            gumbel=None if self.gumbel is None else self.gumbel.copy(),
            gumbel_pos=self.gumbel_pos,
            samples_done=self.samples_done,
        )


def init_state(cfg: RnnConfig, seed: int) -> GenState:
    return GenState(
        hidden=[np.zeros(cfg.hidden_size, dtype=np.float32) for _ in range(cfg.gru_layers)],
        prev_sample=0.0,
        rng=np.random.default_rng(seed),
    )


def forward_step(w: RnnWeights, state: GenState, sample_in: float, params: ControlParams):
    """One conditioned step: returns (logits [256], new state).

    Pure with respect to its inputs; the conditioning consumed here shapes
    these logits (the one-sample response contract).
    """
    if not math.isfinite(sample_in):
        raise ValueError("sample_in must be finite")
    cfg = w.config
    x = np.empty(cfg.input_dims, dtype=w.dtype)
    x[0] = sample_in
    x[1], x[2], x[3] = params.u, params.v, cfg.pitch_norm(params.pitch)
    e = x @ w.w_embed + w.b_embed
    new_hidden = []
    h_in = e
    for lay, h in zip(w.layers, state.hidden):
        gi = h_in @ lay.w_x + lay.b
        hd = h.astype(w.dtype)
        zr = expit(gi[: 2 * cfg.hidden_size] + hd @ lay.u_zr)
        z, r = zr[: cfg.hidden_size], zr[cfg.hidden_size :]
        n = np.tanh(gi[2 * cfg.hidden_size :] + (r * hd) @ lay.u_n)
        h_new = hd + z * (n - hd)
        new_hidden.append(h_new.astype(np.float32))
        h_in = h_new
    logits = h_in @ w.w_out + w.b_out
    new_state = GenState(
        hidden=new_hidden,
        prev_sample=sample_in,
        rng=state.rng,
        gumbel=state.gumbel,
        gumbel_pos=state.gumbel_pos,
        samples_done=state.samples_done + 1,
    )
    return logits.astype(np.float64), new_state


class GenSession:
    """Owns a GenState and renders audio sample by sample.

    Rendering in chunks is bit-identical to one long call: random draws are
    consumed in fixed-size blocks whose buffer and cursor live in the state,
    independent of how callers chunk their render() calls.
    """

    def __init__(self, weights: RnnWeights, seed: int = 0, temperature: float = 1.0,
                 greedy: bool = False, state: GenState | None = None):
        weights.validate()
        if temperature <= 0:
            raise ValueError(f"temperature must be positive, got {temperature}")
        self.weights = weights
        self.cfg = weights.config
        self.temperature = float(temperature)
        self.greedy = bool(greedy)
        self.state = state if state is not None else init_state(self.cfg, seed)
        h = self.cfg.hidden_size
        dt = weights.dtype
        self._embed = np.empty(self.cfg.embed_size, dtype=dt)
        self._in = np.empty(self.cfg.input_dims, dtype=dt)
        self._gi = [np.empty(3 * h, dtype=dt) for _ in weights.layers]
        self._ghzr = [np.empty(2 * h, dtype=dt) for _ in weights.layers]
        self._rh = np.empty(h, dtype=dt)
        self._ghn = np.empty(h, dtype=dt)
        self._tmp = np.empty(h, dtype=dt)
        self._logits = np.empty(256, dtype=dt)

    def render(self, schedule, n_samples: int, out: np.ndarray | None = None) -> np.ndarray:
        """Generate n_samples, conditioning sample t on schedule values at t."""
        if out is None:
            out = np.empty(n_samples, dtype=np.float32)
        elif out.shape[0] < n_samples:
            raise ValueError("out buffer too small")
        w = self.weights
        st = self.state
        cfg = self.cfg
        h_dim = cfg.hidden_size
        lo, hi = cfg.pitch_range
        span = hi - lo
        layers = w.layers
        hs = st.hidden
        in_vec, embed, logits = self._in, self._embed, self._logits
        rh, ghn, tmp = self._rh, self._ghn, self._tmp
        inv_t = 1.0 / self.temperature
        greedy = self.greedy
        prev = st.prev_sample
        table = DECODE_TABLE

        chunk = 2048
        done = 0
        while done < n_samples:
            count = min(chunk, n_samples - done)
            sched = schedule.chunk(st.samples_done, count)
            for k in range(count):
                in_vec[0] = prev
                in_vec[1] = sched[k, 0]
                in_vec[2] = sched[k, 1]
                p = (sched[k, 2] - lo) / span
                in_vec[3] = 0.0 if p < 0.0 else (1.0 if p > 1.0 else p)
                np.dot(in_vec, w.w_embed, out=embed)
                embed += w.b_embed
                x = embed
                for l, lay in enumerate(layers):
                    gi, ghzr = self._gi[l], self._ghzr[l]
                    h = hs[l]
                    np.dot(x, lay.w_x, out=gi)
                    gi += lay.b
                    np.dot(h, lay.u_zr, out=ghzr)
                    zr = gi[: 2 * h_dim]
                    zr += ghzr
                    expit(zr, out=zr)
                    z, r = zr[:h_dim], zr[h_dim:]
                    np.multiply(r, h, out=rh)
                    np.dot(rh, lay.u_n, out=ghn)
                    n = gi[2 * h_dim :]
                    n += ghn
                    np.tanh(n, out=n)
                    np.subtract(n, h, out=tmp)
                    tmp *= z
                    h += tmp
                    x = h
                np.dot(x, w.w_out, out=logits)
                logits += w.b_out
                if greedy:
                    code = int(np.argmax(logits))
                else:
                    if inv_t != 1.0:
                        logits *= inv_t
                    if st.gumbel_pos >= GUMBEL_BLOCK:
                        st.gumbel = st.rng.gumbel(size=(GUMBEL_BLOCK, 256)).astype(np.float32)
                        st.gumbel_pos = 0
                    logits += st.gumbel[st.gumbel_pos]
                    st.gumbel_pos += 1
                    code = int(np.argmax(logits))
                prev = float(table[code])
                out[done + k] = prev
                st.samples_done += 1
            done += count
        st.prev_sample = prev
        return out[:n_samples]


class ParamSchedule:
    """Per-sample (u, v, pitch) values; chunk(start, n) -> [n, 3] float32."""

    def chunk(self, start: int, n: int) -> np.ndarray:
        raise NotImplementedError


class ConstantSchedule(ParamSchedule):
    def __init__(self, params: ControlParams):
        self._row = np.array([[params.u, params.v, params.pitch]], dtype=np.float32)

    def chunk(self, start: int, n: int) -> np.ndarray:
        return np.broadcast_to(self._row, (n, 3))


class ArraySchedule(ParamSchedule):
    """Explicit [n, 3] array of (u, v, pitch); held at the last row beyond."""

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=np.float32)
        if self.values.ndim != 2 or self.values.shape[1] != 3:
            raise ValueError("schedule array must be [n, 3] of (u, v, pitch)")

    def chunk(self, start: int, n: int) -> np.ndarray:
        idx = np.minimum(np.arange(start, start + n), len(self.values) - 1)
        return self.values[idx]


class BreakpointSchedule(ParamSchedule):
    """Breakpoints (sample_index, u, v, pitch) with a per-segment mode:
    'glide' interpolates linearly to the next breakpoint, 'hold' steps."""

    def __init__(self, breakpoints, modes=None):
        pts = sorted(breakpoints, key=lambda p: p[0])
        if not pts:
            raise ValueError("need at least one breakpoint")
        self.index = np.array([p[0] for p in pts], dtype=np.int64)
        self.values = np.array([[p[1], p[2], p[3]] for p in pts], dtype=np.float64)
        self.modes = list(modes) if modes is not None else ["glide"] * len(pts)
        if len(self.modes) != len(pts):
            raise ValueError("one mode per breakpoint segment required")
        for mode in self.modes:
            if mode not in ("glide", "hold"):
                raise ValueError(f"unknown segment mode {mode!r}")

    def chunk(self, start: int, n: int) -> np.ndarray:
        t = np.arange(start, start + n, dtype=np.int64)
        seg = np.clip(np.searchsorted(self.index, t, side="right") - 1, 0, len(self.index) - 1)
        out = self.values[seg].copy()
        for s in range(len(self.index) - 1):
            mask = (seg == s) & (t >= self.index[s]) & (self.modes[s] == "glide")
            if mask.any():
                frac = (t[mask] - self.index[s]) / max(1, self.index[s + 1] - self.index[s])
                out[mask] = self.values[s] + frac[:, None] * (self.values[s + 1] - self.values[s])
        return out.astype(np.float32)

    @classmethod
    def from_csv(cls, path) -> "BreakpointSchedule":
        pts, modes = [], []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#") or line.lower().startswith("sample"):
                    continue
                parts = [p.strip() for p in line.split(",")]
                if len(parts) not in (4, 5):
                    raise ValueError(f"breakpoint rows need 4 or 5 columns, got {line!r}")
                pts.append((int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3])))
                modes.append(parts[4] if len(parts) == 5 else "glide")
        return cls(pts, modes)


def generate(weights: RnnWeights, control, n_samples: int, seed: int = 0,
             temperature: float = 1.0, greedy: bool = False,
             out: np.ndarray | None = None) -> AudioClip:
    """Autoregressive generation for an arbitrary number of samples.

    `control` is a ParamSchedule or a ControlParams (held constant).  Params
    consumed at step t shape the logits of step t.  Memory use is independent
    of n_samples when an `out` buffer is supplied.
    """
    if isinstance(control, ControlParams):
        control = ConstantSchedule(control)
    session = GenSession(weights, seed=seed, temperature=temperature, greedy=greedy)
    samples = session.render(control, n_samples, out=out)
    sr = 16000
    return AudioClip(samples.astype(np.float64), sr)


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(weights: RnnWeights, path, train_config: TrainConfig | None = None) -> None:
    """Versioned container: magic, u32 version, u32 JSON length, JSON header,
    then raw little-endian float32 tensors in declared order."""
    weights.validate()
    params = weights.param_list()
    header = {
        "config": weights.config.to_dict(),
        "train_config": None if train_config is None else train_config.to_dict(),
        "tensors": [
            {"name": n, "shape": list(p.shape)}
            for n, p in zip(weights.param_names(), params)
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for p in params:
            fh.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[RnnWeights, RnnConfig]:
    raw = open(path, "rb").read()
    if len(raw) < 12 or raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    version, json_len = struct.unpack("<II", raw[4:12])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    if len(raw) < 12 + json_len:
        raise ValueError(f"{path}: truncated header")
    header = json.loads(raw[12 : 12 + json_len])
    cfg = RnnConfig.from_dict(header["config"])
    offset = 12 + json_len
    arrays = []
    for spec in header["tensors"]:
        count = int(np.prod(spec["shape"]))
        end = offset + 4 * count
        if end > len(raw):
            raise ValueError(f"{path}: truncated tensor data at {spec['name']}")
        arrays.append(np.frombuffer(raw[offset:end], dtype="<f4").reshape(spec["shape"]).copy())
        offset = end
    if offset != len(raw):
        raise ValueError(f"{path}: trailing bytes after tensor data")

    layers = []
    pos = 2
    for _ in range(cfg.gru_layers):
        layers.append(LayerWeights(*arrays[pos : pos + 4]))
        pos += 4
    weights = RnnWeights(
        config=cfg,
        w_embed=arrays[0],
        b_embed=arrays[1],
        layers=layers,
        w_out=arrays[pos],
        b_out=arrays[pos + 1],
    )
    weights.validate()
    return weights, cfg
