/**
 * Single-producer single-consumer float ring for decoded audio frames.
 * The network side writes whole frames; the audio callback drains whatever
 * it needs, reading zeros on underrun (and counting them).
 */

export class AudioRing {
  private buf: Float32Array;
  private writePos = 0;
  private readPos = 0;
  private stored = 0;
  underruns = 0;
  dropped = 0;

  constructor(capacity: number) {
    this.buf = new Float32Array(capacity);
  }

  get capacity(): number {
    return this.buf.length;
  }

  get available(): number {
    return this.stored;
  }

  get freeSpace(): number {
    return this.buf.length - this.stored;
  }

  /** Write a frame; returns false (dropping it) when it does not fit. */
  write(samples: Float32Array): boolean {
    if (samples.length > this.freeSpace) {
      this.dropped += samples.length;
      return false;
    }
    const tail = this.buf.length - this.writePos;
    if (samples.length <= tail) {
      this.buf.set(samples, this.writePos);
    } else {
      this.buf.set(samples.subarray(0, tail), this.writePos);
      this.buf.set(samples.subarray(tail), 0);
    }
    this.writePos = (this.writePos + samples.length) % this.buf.length;
    this.stored += samples.length;
    return true;
  }

  /** Fill `out` from the ring; missing samples become zeros (underrun). */
  read(out: Float32Array): number {
    const want = out.length;
    const have = Math.min(want, this.stored);
    for (let i = 0; i < have; i++) {
      out[i] = this.buf[this.readPos];
      this.readPos = (this.readPos + 1) % this.buf.length;
    }
    for (let i = have; i < want; i++) out[i] = 0;
    this.stored -= have;
    if (have < want) this.underruns += want - have;
    return have;
  }
}
