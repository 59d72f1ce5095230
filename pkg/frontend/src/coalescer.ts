/**
 * Rate-limited control sender: pointer moves arrive far faster than the
 * server needs, so updates within the coalescing window collapse into one
 * trailing message (last-writer-wins locally, matching the server).
 */

import { ControlMessage } from "./protocol";

export interface Clock {
  now(): number;
  setTimeout(fn: () => void, ms: number): unknown;
  clearTimeout(handle: unknown): void;
}

export const systemClock: Clock = {
  now: () => Date.now(),
  setTimeout: (fn, ms) => setTimeout(fn, ms),
  clearTimeout: (h) => clearTimeout(h as ReturnType<typeof setTimeout>),
};

export class ControlCoalescer {
  private lastSent = -Infinity;
  private pending: ControlMessage | null = null;
  private timer: unknown = null;
  sentCount = 0;

  constructor(
    private send: (msg: ControlMessage) => void,
    private intervalMs = 10,
    private clock: Clock = systemClock,
  ) {}

  /** Queue a message; it goes out now if the window allows, else replaces
   * the pending one and flushes when the window reopens. */
  push(msg: ControlMessage): void {
    const now = this.clock.now();
    if (now - this.lastSent >= this.intervalMs) {
      this.sendNow(msg, now);
      return;
    }
    this.pending = { ...this.pending, ...msg };
    if (this.timer === null) {
      const wait = this.intervalMs - (now - this.lastSent);
      this.timer = this.clock.setTimeout(() => this.flush(), wait);
    }
  }

  flush(): void {
    if (this.timer !== null) {
      this.clock.clearTimeout(this.timer);
      this.timer = null;
    }
    if (this.pending !== null) {
      this.sendNow(this.pending, this.clock.now());
      this.pending = null;
    }
  }

  private sendNow(msg: ControlMessage, now: number): void {
    this.lastSent = now;
    this.sentCount += 1;
    this.send(msg);
  }
}
