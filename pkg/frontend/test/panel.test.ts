import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { CommandPanel, RATE_LIMIT_HZ } from "../src/panel.js";
import { inEnvelope, type SteerCommand } from "../src/protocol.js";

function makePanel(offline: "queue" | "drop" = "queue") {
  const sent: SteerCommand[] = [];
  let seq = 0;
  const panel = new CommandPanel({
    nextSeq: () => ++seq,
    send: (cmd) => sent.push(cmd),
    now: () => Date.now(),
    offline,
  });
  return { panel, sent };
}

describe("command panel", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("zero slider produces a zero-velocity command", () => {
    const { panel, sent } = makePanel();
    panel.setConnected(true);
    panel.update({ velocity: 0 });
    expect(sent).toHaveLength(1);
    expect(sent[0].velocity).toBe(0);
    expect(sent[0].mode).toBe("walk");
  });

  it("dial at 90 degrees emits direction 90", () => {
    const { panel, sent } = makePanel();
    panel.setConnected(true);
    panel.update({ directionDeg: 90 });
    expect(sent[0].direction_deg).toBe(90);
  });

  it("rapid wiggle is limited to 20 messages per second", () => {
    const { panel, sent } = makePanel();
    panel.setConnected(true);
    for (let i = 0; i < 400; i++) {
      panel.update({ velocity: (i % 60) / 10 });
      vi.advanceTimersByTime(2.5); // 400 Hz of input for one second
    }
    expect(sent.length).toBeLessThanOrEqual(RATE_LIMIT_HZ + 1);
    expect(sent.length).toBeGreaterThan(10);
    // trailing edge: the final value still goes out
    vi.advanceTimersByTime(100);
    expect(sent[sent.length - 1].velocity).toBeCloseTo(((400 - 1) % 60) / 10);
  });

  it("sequence numbers strictly increase across emissions", () => {
    const { panel, sent } = makePanel();
    panel.setConnected(true);
    for (let i = 0; i < 10; i++) {
      panel.update({ velocity: i * 0.1 });
      vi.advanceTimersByTime(60);
    }
    const seqs = sent.map((c) => c.seq);
    for (let i = 1; i < seqs.length; i++) expect(seqs[i]).toBeGreaterThan(seqs[i - 1]);
  });

  it("every emitted command is inside the envelopes even for wild input", () => {
    const { panel, sent } = makePanel();
    panel.setConnected(true);
    const wild = [-5, 99, 7.2, NaN, 6.0001, 3];
    for (const v of wild) {
      panel.update({ velocity: v, directionDeg: v * 123, height: v });
      vi.advanceTimersByTime(60);
    }
    expect(sent.length).toBeGreaterThan(0);
    for (const cmd of sent) expect(inEnvelope(cmd)).toBe(true);
  });

  it("crawl mode tightens the velocity envelope", () => {
    const { panel, sent } = makePanel();
    panel.setConnected(true);
    panel.update({ mode: "crawl", velocity: 3 });
    expect(sent[0].velocity).toBe(0.5);
    expect(panel.velocityBounds()).toEqual([0, 0.5]);
  });

  it("disconnected with queue mode replays the latest value on reconnect", () => {
    const { panel, sent } = makePanel("queue");
    panel.update({ velocity: 1.0 });
    panel.update({ velocity: 2.0 });
    expect(sent).toHaveLength(0);
    panel.setConnected(true);
    expect(sent).toHaveLength(1);
    expect(sent[0].velocity).toBe(2.0);
  });

  it("disconnected with drop mode discards input", () => {
    const { panel, sent } = makePanel("drop");
    panel.update({ velocity: 1.0 });
    panel.setConnected(true);
    expect(sent).toHaveLength(0);
  });
});
