// Command panel core: turns input events (slider moves, dial turns,
// mode clicks) into a rate-limited stream of clamped steer commands.
// DOM wiring lives in main.ts; this module is plain logic so the
// headless tests can drive it.

import { clampCommand, HEIGHT_RANGE, velocityRange, type Mode, type SteerCommand } from "./protocol.js";

export interface PanelValues {
  mode: Mode;
  velocity: number;
  directionDeg: number;
  height: number;
  style: string;
}

export const DEFAULT_VALUES: PanelValues = {
  mode: "walk",
  velocity: 0.0,
  directionDeg: 0.0,
  height: 0.8,
  style: "",
};

export const RATE_LIMIT_HZ = 20;

export interface PanelSink {
  (cmd: SteerCommand): void;
}

export interface PanelOptions {
  nextSeq: (nowMs: number) => number;
  send: PanelSink;
  now?: () => number;
  /** When disconnected: queue the latest command ("queue") or drop it. */
  offline?: "queue" | "drop";
}

export class CommandPanel {
  values: PanelValues = { ...DEFAULT_VALUES };
  connected = false;
  private lastEmitMs = -Infinity;
  private pending: PanelValues | null = null;
  private queued: PanelValues | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private readonly minIntervalMs = 1000 / RATE_LIMIT_HZ;

  constructor(private opts: PanelOptions) {}

  private now(): number {
    return this.opts.now ? this.opts.now() : Date.now();
  }

  setConnected(connected: boolean): void {
    this.connected = connected;
    if (connected && this.queued) {
      const v = this.queued;
      this.queued = null;
      this.update(v);
    }
  }

  /** Apply a partial input event; emits (rate-limited) when anything changed. */
  update(change: Partial<PanelValues>): void {
    this.values = { ...this.values, ...change };
    if (!this.connected) {
      if ((this.opts.offline ?? "queue") === "queue") this.queued = { ...this.values };
      return;
    }
    this.requestEmit();
  }

  private requestEmit(): void {
    const now = this.now();
    const dueIn = this.lastEmitMs + this.minIntervalMs - now;
    if (dueIn <= 0) {
      this.emit(now);
      return;
    }
    this.pending = { ...this.values };
    if (this.timer === null) {
      this.timer = setTimeout(() => {
        this.timer = null;
        if (this.pending) {
          this.pending = null;
          this.emit(this.now());
        }
      }, dueIn);
    }
  }

  private emit(nowMs: number): void {
    this.lastEmitMs = nowMs;
    const v = this.values;
    const cmd = clampCommand({
      type: "steer",
      seq: this.opts.nextSeq(nowMs),
      mode: v.mode,
      velocity: v.velocity,
      direction_deg: v.directionDeg,
      style: v.style,
      height: v.height,
      client_ts: nowMs / 1000,
    });
    this.opts.send(cmd);
  }

  /** Slider bounds for the current mode (the UI disables values outside). */
  velocityBounds(): [number, number] {
    return velocityRange(this.values.mode);
  }

  heightBounds(): [number, number] {
    return HEIGHT_RANGE;
  }
}
