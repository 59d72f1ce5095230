/** Coalescing rate limit: a drag storm must emit at most 1 message / 10 ms. */

import { describe, expect, it } from "vitest";

import { ControlCoalescer, Clock } from "../src/coalescer";
import { ControlMessage } from "../src/protocol";

class FakeClock implements Clock {
  time = 0;
  private timers: { at: number; fn: () => void; id: number }[] = [];
  private nextId = 1;

  now(): number {
    return this.time;
  }

  setTimeout(fn: () => void, ms: number): unknown {
    const id = this.nextId++;
    this.timers.push({ at: this.time + ms, fn, id });
    return id;
  }

  clearTimeout(handle: unknown): void {
    this.timers = this.timers.filter((t) => t.id !== handle);
  }

  advance(ms: number): void {
    const target = this.time + ms;
    for (;;) {
      const due = this.timers.filter((t) => t.at <= target).sort((a, b) => a.at - b.at);
      if (!due.length) break;
      const next = due[0];
      this.time = next.at;
      this.timers = this.timers.filter((t) => t.id !== next.id);
      next.fn();
    }
    this.time = target;
  }
}

describe("control coalescing", () => {
  it("a 1-second drag at 1 kHz emits at most 100 messages", () => {
    const clock = new FakeClock();
    const sent: ControlMessage[] = [];
    const c = new ControlCoalescer((m) => sent.push(m), 10, clock);
    for (let k = 0; k < 1000; k++) {
      c.push({ type: "set_params", u: k / 1000, v: 0.5 });
      clock.advance(1);
    }
    c.flush();
    expect(sent.length).toBeLessThanOrEqual(101); // 100 windows + trailing flush
    expect(sent.length).toBeGreaterThan(90);
  });

  it("trailing value is delivered (last-writer-wins)", () => {
    const clock = new FakeClock();
    const sent: ControlMessage[] = [];
    const c = new ControlCoalescer((m) => sent.push(m), 10, clock);
    c.push({ type: "set_params", u: 0.1, v: 0.5 });
    c.push({ type: "set_params", u: 0.2, v: 0.5 });
    c.push({ type: "set_params", u: 0.9, v: 0.5 });
    clock.advance(11);
    expect(sent.length).toBe(2);
    expect(sent[1].u).toBe(0.9);
  });

  it("well-spaced messages pass straight through", () => {
    const clock = new FakeClock();
    const sent: ControlMessage[] = [];
    const c = new ControlCoalescer((m) => sent.push(m), 10, clock);
    for (let k = 0; k < 5; k++) {
      c.push({ type: "set_pitch", pitch: 64 + k });
      clock.advance(20);
    }
    expect(sent.length).toBe(5);
  });

  it("merges queued fields inside one window", () => {
    const clock = new FakeClock();
    const sent: ControlMessage[] = [];
    const c = new ControlCoalescer((m) => sent.push(m), 10, clock);
    c.push({ type: "set_params", u: 0.1, v: 0.1 });  // goes out immediately
    c.push({ type: "set_params", u: 0.3, v: 0.4 });  // queued
    c.push({ type: "set_params", pitch: 70 });       // merges into queued
    clock.advance(11);
    expect(sent.length).toBe(2);
    expect(sent[1]).toMatchObject({ u: 0.3, v: 0.4, pitch: 70 });
  });
});
