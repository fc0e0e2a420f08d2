import { describe, expect, it } from "vitest";

import {
  clampCommand,
  encodeFrame,
  FrameDecoder,
  inEnvelope,
  MODES,
  type SteerCommand,
} from "../src/protocol.js";
import { springGap, springTargetForVelocity, wrap, C_POSITION } from "../src/spring.js";

const steer = (over: Partial<SteerCommand>): SteerCommand => ({
  type: "steer",
  seq: 1,
  mode: "walk",
  velocity: 0,
  direction_deg: 0,
  style: "",
  height: 0.8,
  client_ts: 0,
  ...over,
});

describe("framing", () => {
  it("round-trips messages through the length prefix", () => {
    const decoder = new FrameDecoder();
    const messages = [{ type: "a", n: 1 }, { type: "b", s: "x".repeat(300) }];
    const bytes = messages.map((m) => encodeFrame(m));
    const joined = new Uint8Array(bytes.reduce((n, b) => n + b.length, 0));
    let off = 0;
    for (const b of bytes) {
      joined.set(b, off);
      off += b.length;
    }
    const out: object[] = [];
    for (let i = 0; i < joined.length; i += 5) {
      out.push(...decoder.feed(joined.slice(i, i + 5)));
    }
    expect(out).toEqual(messages);
  });
});

describe("envelope clamping", () => {
  it("clamps velocity per mode", () => {
    expect(clampCommand(steer({ velocity: 9 })).velocity).toBe(6);
    expect(clampCommand(steer({ mode: "crawl", velocity: 2 })).velocity).toBe(0.5);
    expect(clampCommand(steer({ velocity: -1 })).velocity).toBe(0);
  });

  it("wraps direction and clamps height", () => {
    expect(clampCommand(steer({ direction_deg: 400 })).direction_deg).toBeCloseTo(40);
    expect(clampCommand(steer({ direction_deg: -90 })).direction_deg).toBeCloseTo(270);
    expect(clampCommand(steer({ height: 0.05 })).height).toBe(0.3);
    expect(clampCommand(steer({ height: 2 })).height).toBe(0.8);
  });

  it("fuzzed inputs always land inside the envelopes", () => {
    let x = 123456789;
    const rand = () => {
      // xorshift; deterministic fuzz
      x ^= x << 13;
      x ^= x >> 17;
      x ^= x << 5;
      return (x >>> 0) / 4294967296;
    };
    for (let i = 0; i < 5000; i++) {
      const cmd = clampCommand(
        steer({
          mode: (rand() < 0.8 ? MODES[Math.floor(rand() * MODES.length)] : "bogus") as SteerCommand["mode"],
          velocity: (rand() - 0.3) * 40,
          direction_deg: (rand() - 0.5) * 2000,
          height: (rand() - 0.3) * 4,
        }),
      );
      expect(inEnvelope(cmd)).toBe(true);
    }
  });
});

describe("spring mirror", () => {
  it("matches the closed form at t=0 and decays", () => {
    expect(springGap(0, 1, 0.3, C_POSITION, 0)).toBe(1);
    expect(Math.abs(springGap(0, 1, 0, C_POSITION, 100 / C_POSITION))).toBeLessThan(1e-10);
  });

  it("reproduces the hand-computed keyframe", () => {
    // velocity chosen so the linear coefficient cancels; gap(1) = 2^-2.5
    const vBody = 0.5 * C_POSITION;
    const kf = springTargetForVelocity(
      { x: 0, y: 0, heading: 0, vx: vBody, vy: 0, headingRate: 0 },
      1.0,
      0.0,
    );
    expect(kf.x).toBeCloseTo(1 - Math.pow(2, -2.5), 12);
  });

  it("wraps heading to the short arc", () => {
    expect(wrap(3.0 + (2 * Math.PI - 6.0))).toBeCloseTo(-3.0, 12);
    const kf = springTargetForVelocity(
      { x: 0, y: 0, heading: 3.0, vx: 0, vy: 0, headingRate: 0 },
      0.0,
      -3.0,
    );
    expect(Math.abs(kf.heading)).toBeGreaterThan(2.9);
  });
});
