"""Performance service: HTTP endpoints for browsing models and grids, and a
per-session WebSocket stream of generated audio with live parameter control.

HTTP (aiohttp):
    GET  /models                                  -> [{id, ...}]
    GET  /grids                                   -> [{id, resolution, pitch}]
    GET  /grids/{id}/cells/{i}/{j}/audio          -> WAV bytes (exact file)
    GET  /grids/{id}/diff-field?stage=pre|post    -> {"matrix": [[...]], "max": x}
    POST /sessions {"model_id": ...}              -> {"session_id", "ws_url"}

WebSocket (one per session): text frames carry ControlMessage JSON
({type, u, v, pitch, t}); binary frames carry audio as a 14-byte header
(u32 seq, u64 start_sample, u16 n_samples, little-endian) plus PCM16 samples.
Control takes effect at the next generated sample; several messages inside
one frame resolve last-writer-wins.  The server pings every 5 s and closes a
session after 30 s of silence.
"""

from __future__ import annotations

import asyncio
import collections
import json
import struct
import time
import uuid
from pathlib import Path

import numpy as np
from aiohttp import web

from . import performer
from .performer import GenSession, ParamSchedule

FRAME_SAMPLES = 512
HEADER = struct.Struct("<IQH")  # seq, start_sample, n_samples
PING_INTERVAL = 5.0
IDLE_TIMEOUT = 30.0
SESSION_LIMIT = 16


class ControlError(ValueError):
    pass


class LiveSchedule(ParamSchedule):
    """Schedule driven by queued control messages, applied per sample with
    last-writer-wins semantics inside a chunk."""

    def __init__(self, u: float, v: float, pitch: float, pitch_range):
        self.current = np.array([u, v, pitch], dtype=np.float32)
        self.pending = collections.deque()  # rows of [u, v, pitch]
        self.pitch_range = pitch_range

    def push(self, u=None, v=None, pitch=None) -> None:
        row = self.current.copy() if not self.pending else self.pending[-1].copy()
        if u is not None:
            row[0] = u
        if v is not None:
            row[1] = v
        if pitch is not None:
            row[2] = pitch
        self.pending.append(row)

    def chunk(self, start: int, n: int) -> np.ndarray:
        out = np.empty((n, 3), dtype=np.float32)
        cur = self.current
        for k in range(n):
            while self.pending:
                cur = self.pending.popleft()
            out[k] = cur
        self.current = cur
        return out


class Session:
    def __init__(self, session_id: str, model_id: str, weights, seed: int,
                 temperature: float = 1.0):
        self.id = session_id
        self.model_id = model_id
        cfg = weights.config
        lo, hi = cfg.pitch_range
        self.schedule = LiveSchedule(0.5, 0.5, (lo + hi) / 2.0, cfg.pitch_range)
        self.gen = GenSession(weights, seed=seed, temperature=temperature)
        self.seq = 0
        self.samples_sent = 0
        self.paused = False
        self.closed = False
        self.attached = False
        self.created = time.time()
        self.last_active = time.time()
        self._buf = np.empty(FRAME_SAMPLES, dtype=np.float32)

    def next_frame(self) -> bytes:
        """Generate one audio frame and wrap it for the wire."""
        samples = self.gen.render(self.schedule, FRAME_SAMPLES, out=self._buf)
        pcm = np.clip(samples, -1.0, 1.0)
        payload = (pcm * 32767.0).astype("<i2").tobytes()
        header = HEADER.pack(self.seq, self.samples_sent, FRAME_SAMPLES)
        self.seq += 1
        self.samples_sent += FRAME_SAMPLES
        return header + payload

    def apply(self, msg: dict) -> dict:
        kind = msg.get("type")
        self.last_active = time.time()
        if kind == "set_params":
            u, v = msg.get("u"), msg.get("v")
            pitch = msg.get("pitch")
            for name, val, lo, hi in (("u", u, 0.0, 1.0), ("v", v, 0.0, 1.0)):
                if val is not None and not (lo <= float(val) <= hi):
                    raise ControlError(f"{name}={val} outside [{lo}, {hi}]")
            if pitch is not None:
                plo, phi = self.schedule.pitch_range
                if not (plo <= float(pitch) <= phi):
                    raise ControlError(f"pitch={pitch} outside [{plo}, {phi}]")
            self.schedule.push(
                u=None if u is None else float(u),
                v=None if v is None else float(v),
                pitch=None if pitch is None else float(pitch),
            )
        elif kind == "set_pitch":
            pitch = float(msg.get("pitch"))
            plo, phi = self.schedule.pitch_range
            if not (plo <= pitch <= phi):
                raise ControlError(f"pitch={pitch} outside [{plo}, {phi}]")
            self.schedule.push(pitch=pitch)
        elif kind == "pause":
            self.paused = True
        elif kind == "resume":
            self.paused = False
        elif kind == "end":
            self.closed = True
        else:
            raise ControlError(f"unknown control type {kind!r}")
        return {"type": "ack", "applied_at_sample": self.samples_sent}


class ArtifactStore:
    """Read-only view of a pipeline run directory (models + grid bundles)."""

    def __init__(self, root):
        self.root = Path(root)

    def models(self) -> list:
        out = []
        for path in sorted(self.root.rglob("*.smfr")):
            try:
                _, cfg = performer.load_checkpoint(path)
            except ValueError:
                continue
            out.append({
                "id": path.stem if path.parent == self.root
                else f"{path.parent.name}/{path.stem}",
                "path": str(path),
                "hidden_size": cfg.hidden_size,
                "gru_layers": cfg.gru_layers,
                "pitch_range": list(cfg.pitch_range),
            })
        return out

    def model_path(self, model_id: str) -> Path | None:
        for entry in self.models():
            if entry["id"] == model_id:
                return Path(entry["path"])
        return None

    def grids(self) -> list:
        out = []
        for manifest in sorted(self.root.rglob("grid_*/manifest.json")):
            data = json.loads(manifest.read_text())
            out.append({
                "id": manifest.parent.name,
                "resolution": data["resolution"],
                "pitch": data["pitch_set"][0],
            })
        return out

    def grid_dir(self, grid_id: str) -> Path | None:
        for manifest in sorted(self.root.rglob("grid_*/manifest.json")):
            if manifest.parent.name == grid_id:
                return manifest.parent
        return None


class PerformanceService:
    def __init__(self, root, host: str = "127.0.0.1", http_port: int = 0, ws_port: int = 0,
                 session_limit: int = SESSION_LIMIT, seed: int = 0,
                 idle_timeout: float = IDLE_TIMEOUT):
        self.store = ArtifactStore(root)
        self.host = host
        self.http_port = http_port
        self.ws_port = ws_port
        self.session_limit = session_limit
        self.seed = seed
        self.idle_timeout = idle_timeout
        self.sessions: dict[str, Session] = {}
        self._session_counter = 0
        self._ws_server = None
        self._runner = None
        self._reaper: asyncio.Task | None = None

    async def _reap_idle(self) -> None:
        while True:
            await asyncio.sleep(min(5.0, self.idle_timeout / 2))
            now = time.time()
            for sid in list(self.sessions):
                session = self.sessions[sid]
                if not session.attached and now - session.last_active > self.idle_timeout:
                    session.closed = True
                    self.sessions.pop(sid, None)

    # -- HTTP ---------------------------------------------------------------

    def make_app(self) -> web.Application:
        app = web.Application()
        app.router.add_get("/models", self.h_models)
        app.router.add_get("/grids", self.h_grids)
        app.router.add_get("/grids/{gid}/cells/{i}/{j}/audio", self.h_cell_audio)
        app.router.add_get("/grids/{gid}/diff-field", self.h_diff_field)
        app.router.add_post("/sessions", self.h_create_session)
        app.router.add_delete("/sessions/{sid}", self.h_end_session)
        app.router.add_get("/sessions", self.h_list_sessions)
        return app

    async def h_models(self, request) -> web.Response:
        return web.json_response(self.store.models())

    async def h_grids(self, request) -> web.Response:
        return web.json_response(self.store.grids())

    async def h_cell_audio(self, request) -> web.Response:
        gdir = self.store.grid_dir(request.match_info["gid"])
        if gdir is None:
            raise web.HTTPNotFound(reason="unknown grid")
        i, j = request.match_info["i"], request.match_info["j"]
        path = gdir / f"audio_{int(i)}_{int(j)}.wav"
        if not path.exists():
            raise web.HTTPNotFound(reason=f"no cell ({i}, {j})")
        return web.Response(body=path.read_bytes(), content_type="audio/wav",
                            headers={"Cache-Control": "max-age=3600"})

    async def h_diff_field(self, request) -> web.Response:
        gdir = self.store.grid_dir(request.match_info["gid"])
        if gdir is None:
            raise web.HTTPNotFound(reason="unknown grid")
        stage = request.query.get("stage", "post")
        if stage not in ("pre", "post"):
            raise web.HTTPBadRequest(reason="stage must be pre or post")
        path = gdir / f"diff_{stage}.json"
        if not path.exists():
            raise web.HTTPNotFound(reason=f"no {stage} diff field")
        return web.json_response(json.loads(path.read_text()),
                                 headers={"Cache-Control": "max-age=3600"})

    async def h_create_session(self, request) -> web.Response:
        body = await request.json()
        model_id = body.get("model_id")
        path = self.store.model_path(model_id) if model_id else None
        if path is None:
            raise web.HTTPNotFound(reason=f"unknown model {model_id!r}")
        if len(self.sessions) >= self.session_limit:
            raise web.HTTPTooManyRequests(reason="session limit reached")
        weights, _ = performer.load_checkpoint(path)
        self._session_counter += 1
        sid = uuid.uuid4().hex[:12]
        session = Session(sid, model_id, weights,
                          seed=self.seed + self._session_counter,
                          temperature=float(body.get("temperature", 1.0)))
        self.sessions[sid] = session
        ws_url = f"ws://{self.host}:{self.ws_port}/sessions/{sid}"
        return web.json_response({"session_id": sid, "ws_url": ws_url})

    async def h_end_session(self, request) -> web.Response:
        sid = request.match_info["sid"]
        session = self.sessions.pop(sid, None)
        if session is None:
            raise web.HTTPNotFound(reason="unknown session")
        session.closed = True
        return web.json_response({"ended": sid})

    async def h_list_sessions(self, request) -> web.Response:
        return web.json_response([
            {"session_id": s.id, "model_id": s.model_id, "samples_sent": s.samples_sent}
            for s in self.sessions.values()
        ])

    # -- WebSocket ------------------------------------------------------------

    async def ws_handler(self, websocket) -> None:
        sid = websocket.request.path.rsplit("/", 1)[-1]
        session = self.sessions.get(sid)
        if session is None:
            await websocket.close(code=4004, reason="unknown session")
            return
        session.attached = True
        loop = asyncio.get_running_loop()

        async def receiver():
            async for message in websocket:
                if isinstance(message, bytes):
                    continue
                try:
                    msg = json.loads(message)
                except json.JSONDecodeError:
                    await websocket.send(json.dumps({"type": "error", "reason": "bad JSON"}))
                    continue
                try:
                    ack = session.apply(msg)
                    await websocket.send(json.dumps(ack))
                except ControlError as exc:
                    await websocket.send(json.dumps({"type": "error", "reason": str(exc)}))
                if session.closed:
                    break

        recv_task = asyncio.create_task(receiver())
        try:
            while not session.closed:
                if session.paused:
                    await asyncio.sleep(0.01)
                    continue
                frame = await loop.run_in_executor(None, session.next_frame)
                await websocket.send(frame)  # flow control applies backpressure
        except Exception:
            pass
        finally:
            recv_task.cancel()
            self.sessions.pop(sid, None)
            try:
                await websocket.close()
            except Exception:
                pass

    # -- lifecycle ------------------------------------------------------------

    async def start(self) -> tuple[int, int]:
        import websockets

        app = self.make_app()
        self._runner = web.AppRunner(app)
        await self._runner.setup()
        site = web.TCPSite(self._runner, self.host, self.http_port)
        await site.start()
        self.http_port = self._runner.addresses[0][1]

        self._ws_server = await websockets.serve(
            self.ws_handler, self.host, self.ws_port,
            ping_interval=PING_INTERVAL, ping_timeout=IDLE_TIMEOUT,
        )
        self.ws_port = next(iter(self._ws_server.sockets)).getsockname()[1]
        self._reaper = asyncio.create_task(self._reap_idle())
        return self.http_port, self.ws_port

    async def stop(self) -> None:
        if self._reaper is not None:
            self._reaper.cancel()
        for session in self.sessions.values():
            session.closed = True
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()
        if self._runner is not None:
            await self._runner.cleanup()


def serve_forever(root, host: str = "127.0.0.1", http_port: int = 8765,
                  ws_port: int = 8766) -> None:
    service = PerformanceService(root, host=host, http_port=http_port, ws_port=ws_port)

    async def run():
        http, ws = await service.start()
        print(json.dumps({"http": f"http://{host}:{http}", "ws": f"ws://{host}:{ws}"}),
              flush=True)
        await asyncio.Event().wait()

    asyncio.run(run())
