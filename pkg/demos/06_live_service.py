"""Drive a live session end to end, as the browser client would.

Starts the service on ephemeral ports against a throwaway run directory,
creates a session over HTTP, streams audio frames over the WebSocket while
sending parameter changes, and saves what was heard.
"""

import asyncio
import json
import struct
import tempfile
from pathlib import Path

import numpy as np

from soundmesh import gridio, latent as lt, performer as pf, service as sv
from soundmesh.spectral import AudioClip

HEADER = struct.Struct("<IQH")


async def main():
    root = Path(tempfile.mkdtemp(prefix="soundmesh_demo_"))
    cfg = pf.RnnConfig(gru_layers=2, hidden_size=32, embed_size=32)
    pf.save_checkpoint(pf.init_model(cfg, seed=4), root / "model.smfr")

    service = sv.PerformanceService(root, http_port=0, ws_port=0)
    http_port, ws_port = await service.start()
    print(f"service up: http://127.0.0.1:{http_port}  ws://127.0.0.1:{ws_port}")

    import aiohttp
    import websockets

    async with aiohttp.ClientSession() as http:
        async with http.get(f"http://127.0.0.1:{http_port}/models") as resp:
            print("models:", [m["id"] for m in await resp.json()])
        async with http.post(f"http://127.0.0.1:{http_port}/sessions",
                             json={"model_id": "model"}) as resp:
            session = await resp.json()
    print("session:", session["session_id"])

    frames = []
    async with websockets.connect(session["ws_url"]) as ws:
        await ws.send(json.dumps({"type": "set_params", "u": 0.1, "v": 0.9}))
        sweep = np.linspace(64, 76, 20)
        k = 0
        while len(frames) < 40:
            msg = await ws.recv()
            if isinstance(msg, bytes):
                seq, start, n = HEADER.unpack(msg[:14])
                frames.append(np.frombuffer(msg[14:], dtype="<i2"))
                if len(frames) % 2 == 0 and k < len(sweep):
                    await ws.send(json.dumps({"type": "set_pitch",
                                              "pitch": float(sweep[k])}))
                    k += 1
            else:
                ack = json.loads(msg)
                if ack.get("type") == "error":
                    print("rejected:", ack["reason"])
        await ws.send(json.dumps({"type": "end"}))

    audio = np.concatenate(frames).astype(np.float64) / 32767.0
    gridio.write_wav("demo_live_session.wav", AudioClip(audio))
    print(f"captured {len(audio) / 16000:.2f} s -> demo_live_session.wav")
    await service.stop()


if __name__ == "__main__":
    asyncio.run(main())
