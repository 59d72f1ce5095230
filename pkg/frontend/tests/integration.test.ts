/**
 * Live round trip against the real service on localhost: spawn it, create a
 * session over HTTP, and measure the time from sending a parameter change to
 * hearing it acknowledged and applied in the stream.
 *
 * Runs when SOUNDMESH_INTEGRATION=1 (needs the python package installed).
 */

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { checkFrameContinuity, parseFrame, AudioFrame } from "../src/protocol";

const enabled = process.env.SOUNDMESH_INTEGRATION === "1";
const maybe = enabled ? describe : describe.skip;

let proc: ChildProcess | null = null;
let httpBase = "";

maybe("localhost round trip", () => {
  beforeAll(async () => {
    const root = mkdtempSync(join(tmpdir(), "soundmesh-it-"));
    const prep = `
import sys
from soundmesh import performer as pf
cfg = pf.RnnConfig(gru_layers=2, hidden_size=32, embed_size=32)
pf.save_checkpoint(pf.init_model(cfg, seed=4), sys.argv[1] + "/model.smfr")
`;
    writeFileSync(join(root, "prep.py"), prep);
    await new Promise<void>((res, rej) => {
      const p = spawn("python3", [join(root, "prep.py"), root]);
      p.on("exit", (code) => (code === 0 ? res() : rej(new Error(`prep exited ${code}`))));
    });

    proc = spawn("python3", ["-m", "soundmesh.cli", "serve",
      "--out", root, "--port", "8931", "--ws-port", "8932"]);
    httpBase = "http://127.0.0.1:8931";
    await new Promise<void>((res, rej) => {
      let out = "";
      proc!.stdout!.on("data", (d) => {
        out += String(d);
        if (out.includes("http")) res();
      });
      proc!.on("exit", () => rej(new Error("service died")));
      setTimeout(() => rej(new Error("service start timeout")), 20000);
    });
  }, 30000);

  afterAll(() => {
    proc?.kill();
  });

  it("parameter change is audible in the stream within 200 ms", async () => {
    const resp = await fetch(`${httpBase}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ model_id: "model" }),
    });
    expect(resp.ok).toBe(true);
    const session = (await resp.json()) as { session_id: string; ws_url: string };

    const ws = new WebSocket(session.ws_url);
    ws.binaryType = "arraybuffer";
    await new Promise<void>((res) => ws.on("open", () => res()));

    const frames: AudioFrame[] = [];
    let ackSample = -1;
    let ackAt = 0;
    let heardAt = 0;
    let sentAt = 0;

    const done = new Promise<void>((res, rej) => {
      const timer = setTimeout(() => rej(new Error("no round trip within 5 s")), 5000);
      ws.on("message", (data, isBinary) => {
        if (isBinary) {
          const buf = data instanceof ArrayBuffer
            ? data
            : (data as Buffer).buffer.slice(
                (data as Buffer).byteOffset,
                (data as Buffer).byteOffset + (data as Buffer).byteLength);
          const frame = parseFrame(buf);
          frames.push(frame);
          if (frames.length === 3 && sentAt === 0) {
            sentAt = performance.now();
            ws.send(JSON.stringify({ type: "set_params", u: 0.9, v: 0.1 }));
          }
          if (ackSample >= 0 && heardAt === 0
              && frame.startSample + frame.samples.length > ackSample) {
            heardAt = performance.now();
            clearTimeout(timer);
            res();
          }
        } else {
          const msg = JSON.parse(String(data));
          if (msg.type === "ack") {
            ackSample = msg.applied_at_sample;
            ackAt = performance.now();
          }
        }
      });
    });
    await done;
    ws.send(JSON.stringify({ type: "end" }));
    ws.close();

    expect(checkFrameContinuity(frames)).toBeNull();
    const ackLatency = ackAt - sentAt;
    const heardLatency = heardAt - sentAt;
    expect(ackLatency).toBeLessThan(200);
    expect(heardLatency).toBeLessThan(200);
  }, 20000);
});
