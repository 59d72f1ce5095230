/**
 * Wire protocol shared with the performance service.
 *
 * Text frames carry ControlMessage JSON; binary frames carry audio as a
 * 14-byte little-endian header (u32 seq, u64 start_sample, u16 n_samples)
 * followed by PCM16 samples.
 */

export const FRAME_HEADER_BYTES = 14;
export const DEFAULT_FRAME_SAMPLES = 512;

export type ControlType = "set_params" | "set_pitch" | "pause" | "resume" | "end";

export interface ControlMessage {
  type: ControlType;
  u?: number;
  v?: number;
  pitch?: number;
  /** client timestamp, milliseconds */
  t?: number;
}

export interface ServerText {
  type: "ack" | "error";
  applied_at_sample?: number;
  reason?: string;
}

export interface AudioFrame {
  seq: number;
  startSample: number;
  samples: Float32Array;
}

const CONTROL_TYPES: ReadonlySet<string> = new Set([
  "set_params",
  "set_pitch",
  "pause",
  "resume",
  "end",
]);

function inRange(x: unknown, lo: number, hi: number): boolean {
  return typeof x === "number" && Number.isFinite(x) && x >= lo && x <= hi;
}

/** Validate an outgoing control message against the schema the server enforces. */
export function validateControl(
  msg: ControlMessage,
  pitchRange: [number, number] = [64, 76],
): string | null {
  if (!CONTROL_TYPES.has(msg.type)) return `unknown type ${String(msg.type)}`;
  if (msg.type === "set_params") {
    if (msg.u === undefined && msg.v === undefined && msg.pitch === undefined) {
      return "set_params carries no fields";
    }
    if (msg.u !== undefined && !inRange(msg.u, 0, 1)) return `u=${msg.u} outside [0, 1]`;
    if (msg.v !== undefined && !inRange(msg.v, 0, 1)) return `v=${msg.v} outside [0, 1]`;
  }
  if (msg.type === "set_params" || msg.type === "set_pitch") {
    if (msg.pitch !== undefined && !inRange(msg.pitch, pitchRange[0], pitchRange[1])) {
      return `pitch=${msg.pitch} outside [${pitchRange[0]}, ${pitchRange[1]}]`;
    }
  }
  if (msg.type === "set_pitch" && msg.pitch === undefined) return "set_pitch needs pitch";
  return null;
}

/** Parse a binary audio frame; throws on malformed headers. */
export function parseFrame(data: ArrayBuffer): AudioFrame {
  if (data.byteLength < FRAME_HEADER_BYTES) {
    throw new Error(`frame of ${data.byteLength} bytes is shorter than the header`);
  }
  const view = new DataView(data);
  const seq = view.getUint32(0, true);
  const startSample = Number(view.getBigUint64(4, true));
  const nSamples = view.getUint16(12, true);
  const expected = FRAME_HEADER_BYTES + 2 * nSamples;
  if (data.byteLength !== expected) {
    throw new Error(`frame claims ${nSamples} samples but carries ${data.byteLength} bytes`);
  }
  const pcm = new Int16Array(data, FRAME_HEADER_BYTES, nSamples);
  const samples = new Float32Array(nSamples);
  for (let i = 0; i < nSamples; i++) samples[i] = pcm[i] / 32767;
  return { seq, startSample, samples };
}

/** Build a binary frame (used by tests and loopback tooling). */
export function buildFrame(seq: number, startSample: number, samples: Float32Array): ArrayBuffer {
  const buf = new ArrayBuffer(FRAME_HEADER_BYTES + 2 * samples.length);
  const view = new DataView(buf);
  view.setUint32(0, seq, true);
  view.setBigUint64(4, BigInt(startSample), true);
  view.setUint16(12, samples.length, true);
  const pcm = new Int16Array(buf, FRAME_HEADER_BYTES);
  for (let i = 0; i < samples.length; i++) {
    pcm[i] = Math.max(-32767, Math.min(32767, Math.round(samples[i] * 32767)));
  }
  return buf;
}

/**
 * Check a sequence of parsed frames for protocol conformance: contiguous
 * sequence numbers and start_sample arithmetic (start[k+1] = start[k] + n[k]).
 */
export function checkFrameContinuity(frames: AudioFrame[]): string | null {
  for (let k = 1; k < frames.length; k++) {
    if (frames[k].seq !== frames[k - 1].seq + 1) {
      return `sequence gap: ${frames[k - 1].seq} -> ${frames[k].seq}`;
    }
    const expected = frames[k - 1].startSample + frames[k - 1].samples.length;
    if (frames[k].startSample !== expected) {
      return `start_sample mismatch at seq ${frames[k].seq}: ` +
        `${frames[k].startSample} != ${expected}`;
    }
  }
  return null;
}

export function isServerText(x: unknown): x is ServerText {
  if (typeof x !== "object" || x === null) return false;
  const t = (x as { type?: unknown }).type;
  return t === "ack" || t === "error";
}
