import { describe, expect, it } from "vitest";

import type { StateUpdate } from "../src/protocol.js";
import { UiSession } from "../src/session.js";
import { render, type Ctx2D } from "../src/view.js";

// records every draw call so purity is checkable
class StubCtx implements Ctx2D {
  ops: string[] = [];
  fillStyle: string = "";
  strokeStyle: string = "";
  lineWidth = 1;
  font = "";
  fillRect(x: number, y: number, w: number, h: number) {
    this.ops.push(`fillRect ${x} ${y} ${w} ${h} ${this.fillStyle}`);
  }
  beginPath() {
    this.ops.push("beginPath");
  }
  moveTo(x: number, y: number) {
    this.ops.push(`moveTo ${x.toFixed(3)} ${y.toFixed(3)}`);
  }
  lineTo(x: number, y: number) {
    this.ops.push(`lineTo ${x.toFixed(3)} ${y.toFixed(3)}`);
  }
  arc(x: number, y: number, r: number) {
    this.ops.push(`arc ${x.toFixed(3)} ${y.toFixed(3)} ${r}`);
  }
  stroke() {
    this.ops.push(`stroke ${this.strokeStyle}`);
  }
  fill() {
    this.ops.push(`fill ${this.fillStyle}`);
  }
  fillText(text: string, x: number, y: number) {
    this.ops.push(`text "${text}" ${x} ${y} ${this.fillStyle}`);
  }
}

const state = (over: Partial<StateUpdate>): StateUpdate => ({
  type: "state",
  time_s: 1.0,
  wall_ts: 0,
  root_pos: [0.5, 0.2, 0.8],
  root_yaw: 0.1,
  joint_pos: [0, 0.1, 0.2, -0.1, 0.3, 0.5, -0.5],
  applied_seq: 2,
  applied_at: 0.9,
  applied_warnings: [],
  plan_cmd_seq: 2,
  plan_created_at: 0.92,
  plan_preview: [
    [0.5, 0.2, 0.8, 0.0],
    [0.8, 0.3, 0.8, 0.1],
    [1.1, 0.4, 0.8, 0.2],
  ],
  plan_spring_target: [1.2, 0.5, 0.2],
  plan_root_state: [0.5, 0.2, 0.1, 0.4, 0.0, 0.0],
  deadline_misses: {},
  ...over,
});

function sessionWith(update: StateUpdate | null): UiSession {
  const s = new UiSession(0); // fixed seq base keeps badge text deterministic
  s.onOpen();
  if (update) s.onMessage(update, 1000);
  return s;
}

describe("view", () => {
  it("renders identically from the same snapshot (pure function)", () => {
    const session = sessionWith(state({}));
    const snap = session.snapshot(1100);
    const a = new StubCtx();
    const b = new StubCtx();
    render(a, snap);
    render(b, snap);
    expect(a.ops).toEqual(b.ops);
    expect(a.ops.length).toBeGreaterThan(20);
  });

  it("hides the preview polyline when no plan exists", () => {
    const withPlan = new StubCtx();
    render(withPlan, sessionWith(state({})).snapshot(1100));
    const noPlan = new StubCtx();
    render(noPlan, sessionWith(state({ plan_preview: [], plan_spring_target: null })).snapshot(1100));
    const strokes = (ops: string[]) => ops.filter((o) => o === "stroke #ffd166").length;
    expect(strokes(withPlan.ops)).toBeGreaterThan(0);
    expect(strokes(noPlan.ops)).toBe(0);
  });

  it("draws a straight preview for a straight-line plan", () => {
    const straight = state({
      plan_preview: [
        [0.5, 0.2, 0.8, 0],
        [1.0, 0.2, 0.8, 0],
        [1.5, 0.2, 0.8, 0],
      ],
    });
    const ctx = new StubCtx();
    render(ctx, sessionWith(straight).snapshot(1100));
    // isolate the yellow preview polyline: ops between its beginPath and
    // the stroke in the preview color
    const strokeAt = ctx.ops.findIndex((o) => o === "stroke #ffd166");
    expect(strokeAt).toBeGreaterThan(0);
    const pathStart = ctx.ops.lastIndexOf("beginPath", strokeAt);
    const ys = ctx.ops
      .slice(pathStart, strokeAt)
      .filter((o) => o.startsWith("lineTo") || o.startsWith("moveTo"))
      .map((o) => Number(o.split(" ")[2]));
    expect(ys.length).toBe(3);
    expect(new Set(ys.map((y) => y.toFixed(6))).size).toBe(1); // horizontal
  });

  it("shows a stall indicator when the stream goes stale", () => {
    const session = sessionWith(state({}));
    const fresh = new StubCtx();
    render(fresh, session.snapshot(1100));
    const stale = new StubCtx();
    render(stale, session.snapshot(5000));
    expect(stale.ops.some((o) => o.includes("STALE"))).toBe(true);
    expect(fresh.ops.some((o) => o.includes("STALE"))).toBe(false);
  });

  it("surfaces seq lag when the server falls behind", () => {
    const session = sessionWith(null);
    for (let i = 0; i < 5; i++) session.nextSeq(1000 + i);
    session.onMessage(state({ applied_seq: 2 }), 1010);
    const ctx = new StubCtx();
    render(ctx, session.snapshot(1020));
    expect(ctx.ops.some((o) => o.includes("lag 3"))).toBe(true);
  });

  it("renders the empty session without crashing", () => {
    const ctx = new StubCtx();
    render(ctx, sessionWith(null).snapshot(0));
    expect(ctx.ops.length).toBeGreaterThan(5);
  });
});
