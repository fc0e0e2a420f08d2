// Client session state: the single source the renderer reads from.
// Network callbacks mutate the session; rendering is a pure function of
// its snapshot, so there is no accumulation drift.

import type { CommandAck, Hello, ServerMessage, StateUpdate, SteerCommand } from "./protocol.js";

export type ConnectionState = "connecting" | "connected" | "closed";

export interface SessionSnapshot {
  connection: ConnectionState;
  hello: Hello | null;
  lastState: StateUpdate | null;
  lastStateWallMs: number;
  lastAck: CommandAck | null;
  lastError: string | null;
  lastSentSeq: number;
  rttMs: number | null;
  stale: boolean;
  realizedPath: [number, number][];
}

const STALE_AFTER_MS = 1000;
const PATH_CAP = 600;

export class UiSession {
  private connection: ConnectionState = "connecting";
  private hello: Hello | null = null;
  private lastState: StateUpdate | null = null;
  private lastStateWallMs = 0;
  private lastAck: CommandAck | null = null;
  private lastError: string | null = null;
  private seq: number;
  private sendTimes = new Map<number, number>();
  private rttMs: number | null = null;
  private realizedPath: [number, number][] = [];

  // Seqs must outrun any earlier session of this client: the server keeps
  // the newest applied seq across connections, so a fresh counter starting
  // at 1 would look already-applied. A millisecond-epoch base keeps seqs
  // strictly increasing across reconnects.
  constructor(seqBase: number = (Date.now() % 1_000_000_000) * 1000) {
    this.seq = seqBase;
  }

  /** Allocate the next strictly increasing command sequence number. */
  nextSeq(nowMs: number): number {
    this.seq += 1;
    this.sendTimes.set(this.seq, nowMs);
    if (this.sendTimes.size > 64) {
      const oldest = this.sendTimes.keys().next().value as number;
      this.sendTimes.delete(oldest);
    }
    return this.seq;
  }

  get lastSentSeq(): number {
    return this.seq;
  }

  onOpen(): void {
    this.connection = "connected";
  }

  onClose(): void {
    this.connection = "closed";
  }

  onMessage(msg: ServerMessage, nowMs: number): void {
    switch (msg.type) {
      case "hello":
        this.hello = msg as Hello;
        break;
      case "state": {
        const state = msg as StateUpdate;
        this.lastState = state;
        this.lastStateWallMs = nowMs;
        const sent = this.sendTimes.get(state.applied_seq);
        if (sent !== undefined) {
          this.rttMs = nowMs - sent;
          this.sendTimes.delete(state.applied_seq);
        }
        this.realizedPath.push([state.root_pos[0], state.root_pos[1]]);
        if (this.realizedPath.length > PATH_CAP) this.realizedPath.shift();
        break;
      }
      case "command_ack":
        this.lastAck = msg as CommandAck;
        break;
      case "error":
        this.lastError = (msg as { reason?: string }).reason ?? "unknown";
        break;
      default:
        break;
    }
  }

  snapshot(nowMs: number): SessionSnapshot {
    return {
      connection: this.connection,
      hello: this.hello,
      lastState: this.lastState,
      lastStateWallMs: this.lastStateWallMs,
      lastAck: this.lastAck,
      lastError: this.lastError,
      lastSentSeq: this.seq,
      rttMs: this.rttMs,
      stale: this.lastState !== null && nowMs - this.lastStateWallMs > STALE_AFTER_MS,
      realizedPath: [...this.realizedPath],
    };
  }
}

/** Seqs must strictly increase; a violation is a client bug. */
export function assertSeqIncreases(previous: number, next: number): void {
  if (next <= previous) {
    throw new Error(`sequence regression: ${next} after ${previous}`);
  }
}

export type { SteerCommand };
