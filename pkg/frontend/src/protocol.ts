// Wire protocol mirror: message shapes, envelope clamping, TCP framing.
// See docs/protocol.md in the repo root for the byte-level contract.

export const VELOCITY_RANGE: [number, number] = [0.0, 6.0];
export const CRAWL_VELOCITY_RANGE: [number, number] = [0.0, 0.5];
export const HEIGHT_RANGE: [number, number] = [0.3, 0.8];
export const MODES = ["walk", "run", "crawl", "squat", "kneel", "box", "layer"] as const;

export type Mode = (typeof MODES)[number];

export interface SteerCommand {
  type: "steer";
  seq: number;
  mode: Mode;
  velocity: number;
  direction_deg: number;
  style: string;
  height: number;
  client_ts: number;
}

export interface StateUpdate {
  type: "state";
  time_s: number;
  wall_ts: number;
  root_pos: [number, number, number];
  root_yaw: number;
  joint_pos: number[];
  applied_seq: number;
  applied_at: number;
  applied_warnings: string[];
  plan_cmd_seq: number;
  plan_created_at: number;
  plan_preview: [number, number, number, number][];
  plan_spring_target: [number, number, number] | null;
  plan_root_state: [number, number, number, number, number, number] | null;
  deadline_misses: Record<string, number>;
}

export interface CommandAck {
  type: "command_ack";
  seq: number;
  clamped: boolean;
  clamped_fields: string[];
}

export interface Hello {
  type: "hello";
  version: number;
  skeleton: string;
  joint_count: number;
  styles: string[];
}

export interface ErrorMessage {
  type: "error";
  reason: string;
  detail: string;
}

export type ServerMessage = StateUpdate | CommandAck | Hello | ErrorMessage | { type: string };

const clampNum = (v: number, lo: number, hi: number) => Math.min(Math.max(v, lo), hi);

export function velocityRange(mode: Mode): [number, number] {
  return mode === "crawl" ? CRAWL_VELOCITY_RANGE : VELOCITY_RANGE;
}

/** Clamp every field into the published envelopes; never trust raw input. */
export function clampCommand(cmd: SteerCommand): SteerCommand {
  const mode = (MODES as readonly string[]).includes(cmd.mode) ? cmd.mode : "walk";
  const [vlo, vhi] = velocityRange(mode as Mode);
  let velocity = clampNum(cmd.velocity, vlo, vhi);
  let direction = cmd.direction_deg % 360.0;
  if (direction < 0) direction += 360.0;
  const height = clampNum(cmd.height, HEIGHT_RANGE[0], HEIGHT_RANGE[1]);
  if (!Number.isFinite(velocity)) velocity = vlo;
  if (!Number.isFinite(direction)) direction = 0;
  return {
    ...cmd,
    mode: mode as Mode,
    velocity,
    direction_deg: direction,
    height: Number.isFinite(height) ? height : HEIGHT_RANGE[1],
  };
}

export function inEnvelope(cmd: SteerCommand): boolean {
  const [vlo, vhi] = velocityRange(cmd.mode);
  return (
    cmd.velocity >= vlo &&
    cmd.velocity <= vhi &&
    cmd.direction_deg >= 0 &&
    cmd.direction_deg < 360 &&
    cmd.height >= HEIGHT_RANGE[0] &&
    cmd.height <= HEIGHT_RANGE[1] &&
    (MODES as readonly string[]).includes(cmd.mode)
  );
}

// --- TCP framing: 4-byte big-endian length + UTF-8 JSON ------------------

export function encodeFrame(message: object): Uint8Array {
  const payload = new TextEncoder().encode(JSON.stringify(message));
  const out = new Uint8Array(4 + payload.length);
  new DataView(out.buffer).setUint32(0, payload.length, false);
  out.set(payload, 4);
  return out;
}

export class FrameDecoder {
  private buf = new Uint8Array(0);

  feed(data: Uint8Array): ServerMessage[] {
    const joined = new Uint8Array(this.buf.length + data.length);
    joined.set(this.buf);
    joined.set(data, this.buf.length);
    this.buf = joined;
    const out: ServerMessage[] = [];
    for (;;) {
      if (this.buf.length < 4) return out;
      const length = new DataView(this.buf.buffer, this.buf.byteOffset).getUint32(0, false);
      if (this.buf.length < 4 + length) return out;
      const payload = this.buf.slice(4, 4 + length);
      this.buf = this.buf.slice(4 + length);
      out.push(JSON.parse(new TextDecoder().decode(payload)));
    }
  }
}
