/**
 * Live performance view: create a session, stream frames into a playback
 * ring feeding the Web Audio graph, and send coalesced control messages from
 * the XY pad and pitch slider.
 */

import { ControlCoalescer } from "./coalescer";
import {
  AudioFrame,
  ControlMessage,
  checkFrameContinuity,
  isServerText,
  parseFrame,
  validateControl,
  DEFAULT_FRAME_SAMPLES,
} from "./protocol";
import { AudioRing } from "./ring";

export interface PerformanceState {
  sessionId: string | null;
  u: number;
  v: number;
  pitch: number;
  connected: boolean;
  lastAckSample: number;
  level: number;
  underruns: number;
  protocolError: string | null;
}

export interface SessionTransport {
  /** POST /sessions; resolves to {session_id, ws_url}. */
  createSession(modelId: string): Promise<{ session_id: string; ws_url: string }>;
  /** Open the socket; returns a close function. */
  connect(
    url: string,
    onText: (msg: unknown) => void,
    onBinary: (data: ArrayBuffer) => void,
    onClose: () => void,
  ): Promise<(msg: string) => void>;
}

export class PerformanceController {
  state: PerformanceState = {
    sessionId: null,
    u: 0.5,
    v: 0.5,
    pitch: 70,
    connected: false,
    lastAckSample: 0,
    level: 0,
    underruns: 0,
    protocolError: null,
  };
  readonly ring: AudioRing;
  private coalescer: ControlCoalescer;
  private sendRaw: ((msg: string) => void) | null = null;
  private lastFrame: AudioFrame | null = null;
  private pitchRange: [number, number];

  constructor(
    private transport: SessionTransport,
    opts: { bufferFrames?: number; coalesceMs?: number; pitchRange?: [number, number] } = {},
  ) {
    // keep at most a few frames queued client-side to stay responsive
    const frames = opts.bufferFrames ?? 3;
    this.ring = new AudioRing(frames * DEFAULT_FRAME_SAMPLES);
    this.pitchRange = opts.pitchRange ?? [64, 76];
    this.coalescer = new ControlCoalescer(
      (msg) => this.sendControl(msg),
      opts.coalesceMs ?? 10,
    );
  }

  async start(modelId: string): Promise<void> {
    const session = await this.transport.createSession(modelId);
    this.state.sessionId = session.session_id;
    this.sendRaw = await this.transport.connect(
      session.ws_url,
      (msg) => this.onText(msg),
      (data) => this.onBinary(data),
      () => {
        this.state.connected = false;
      },
    );
    this.state.connected = true;
  }

  /** XY pad handler; coalesced to at most one message per window. */
  setParams(u: number, v: number): void {
    this.state.u = u;
    this.state.v = v;
    this.coalescer.push({ type: "set_params", u, v, t: Date.now() });
  }

  setPitch(pitch: number): void {
    this.state.pitch = pitch;
    this.coalescer.push({ type: "set_pitch", pitch, t: Date.now() });
  }

  end(): void {
    this.coalescer.flush();
    this.sendControl({ type: "end" });
    this.state.connected = false;
  }

  /** Pull decoded samples for the audio callback. */
  pull(out: Float32Array): void {
    const before = this.ring.underruns;
    this.ring.read(out);
    this.state.underruns = this.ring.underruns;
    if (this.ring.underruns > before) this.state.level = 0;
  }

  private sendControl(msg: ControlMessage): void {
    const problem = validateControl(msg, this.pitchRange);
    if (problem !== null) {
      this.state.protocolError = problem;
      return;
    }
    if (this.sendRaw) this.sendRaw(JSON.stringify(msg));
  }

  private onText(raw: unknown): void {
    if (!isServerText(raw)) return;
    if (raw.type === "ack" && raw.applied_at_sample !== undefined) {
      this.state.lastAckSample = raw.applied_at_sample;
    } else if (raw.type === "error") {
      this.state.protocolError = raw.reason ?? "server rejected a message";
    }
  }

  private onBinary(data: ArrayBuffer): void {
    let frame: AudioFrame;
    try {
      frame = parseFrame(data);
    } catch (err) {
      this.state.protocolError = String(err);
      return;
    }
    if (this.lastFrame) {
      const gap = checkFrameContinuity([this.lastFrame, frame]);
      if (gap !== null) this.state.protocolError = gap;
    }
    this.lastFrame = frame;
    this.ring.write(frame.samples);
    let peak = 0;
    for (let i = 0; i < frame.samples.length; i++) {
      const a = Math.abs(frame.samples[i]);
      if (a > peak) peak = a;
    }
    this.state.level = peak;
  }
}

/** Wire the controller into Web Audio; browser-only. */
export function attachAudioOutput(
  controller: PerformanceController,
  context: AudioContext,
): ScriptProcessorNode {
  const node = context.createScriptProcessor(1024, 0, 1);
  node.onaudioprocess = (event) => {
    controller.pull(event.outputBuffer.getChannelData(0));
  };
  node.connect(context.destination);
  return node;
}
