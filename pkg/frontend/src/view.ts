// Rendering: a pure function of the latest session snapshot onto a 2D
// context. Two panes: a top-down root-trajectory map (realized path
// plus the planned preview polyline) and a side-view stick figure from
// the joint angles, with health badges along the top.

import type { SessionSnapshot } from "./session.js";

export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export interface ViewConfig {
  width: number;
  height: number;
  metersPerPane: number; // world meters mapped across the map pane
}

export const DEFAULT_VIEW: ViewConfig = { width: 900, height: 480, metersPerPane: 6 };

export function render(ctx: Ctx2D, snap: SessionSnapshot, cfg: ViewConfig = DEFAULT_VIEW): void {
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, cfg.width, cfg.height);
  const paneW = cfg.width / 2;
  drawMap(ctx, snap, { x: 0, y: 0, w: paneW, h: cfg.height }, cfg.metersPerPane);
  drawFigure(ctx, snap, { x: paneW, y: 0, w: paneW, h: cfg.height });
  drawBadges(ctx, snap, cfg.width);
}

interface Pane {
  x: number;
  y: number;
  w: number;
  h: number;
}

function drawMap(ctx: Ctx2D, snap: SessionSnapshot, pane: Pane, metersPerPane: number): void {
  const state = snap.lastState;
  const cx = pane.x + pane.w / 2;
  const cy = pane.y + pane.h / 2;
  const scale = Math.min(pane.w, pane.h) / metersPerPane;
  const origin = state ? [state.root_pos[0], state.root_pos[1]] : [0, 0];
  const toPane = (wx: number, wy: number): [number, number] => [
    cx + (wx - origin[0]) * scale,
    cy - (wy - origin[1]) * scale, // world +y is up on screen
  ];

  ctx.strokeStyle = "#2a3138";
  ctx.lineWidth = 1;
  for (let m = -Math.floor(metersPerPane / 2); m <= metersPerPane / 2; m++) {
    ctx.beginPath();
    ctx.moveTo(cx + m * scale, pane.y);
    ctx.lineTo(cx + m * scale, pane.y + pane.h);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(pane.x, cy + m * scale);
    ctx.lineTo(pane.x + pane.w, cy + m * scale);
    ctx.stroke();
  }

  if (snap.realizedPath.length > 1) {
    ctx.strokeStyle = "#6fb3ff";
    ctx.lineWidth = 2;
    ctx.beginPath();
    snap.realizedPath.forEach(([wx, wy], i) => {
      const [px, py] = toPane(wx, wy);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
  }

  // planned preview: hidden entirely when the server has no plan yet
  if (state && state.plan_preview.length > 1) {
    ctx.strokeStyle = "#ffd166";
    ctx.lineWidth = 2;
    ctx.beginPath();
    state.plan_preview.forEach((p, i) => {
      const [px, py] = toPane(p[0], p[1]);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
  }

  if (state) {
    const [px, py] = toPane(state.root_pos[0], state.root_pos[1]);
    ctx.fillStyle = "#ffffff";
    ctx.beginPath();
    ctx.arc(px, py, 5, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = "#ffffff";
    ctx.beginPath();
    ctx.moveTo(px, py);
    ctx.lineTo(px + 14 * Math.cos(state.root_yaw), py - 14 * Math.sin(state.root_yaw));
    ctx.stroke();
    if (state.plan_spring_target) {
      const [tx, ty] = toPane(state.plan_spring_target[0], state.plan_spring_target[1]);
      ctx.strokeStyle = "#ef476f";
      ctx.beginPath();
      ctx.arc(tx, ty, 6, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }
}

function drawFigure(ctx: Ctx2D, snap: SessionSnapshot, pane: Pane): void {
  const state = snap.lastState;
  const groundY = pane.y + pane.h * 0.85;
  const scale = pane.h * 0.55; // meters to pixels for a ~1m figure
  ctx.strokeStyle = "#2a3138";
  ctx.beginPath();
  ctx.moveTo(pane.x, groundY);
  ctx.lineTo(pane.x + pane.w, groundY);
  ctx.stroke();
  if (!state) return;

  const rootX = pane.x + pane.w / 2;
  const rootY = groundY - state.root_pos[2] * scale;
  const j = state.joint_pos;
  // desk layout: [torso, l_hip, l_knee, r_hip, r_knee, l_shoulder, r_shoulder]
  const torso = j[0] ?? 0;
  const segments: [number, number, number, number][] = [];
  const leg = (hip: number, knee: number, side: number) => {
    const thighLen = 0.3 * scale;
    const shinLen = 0.3 * scale;
    const hx = rootX + side * 6;
    const hy = rootY;
    const kx = hx + thighLen * Math.sin(hip);
    const ky = hy + thighLen * Math.cos(hip);
    const fx = kx + shinLen * Math.sin(hip + knee);
    const fy = ky + shinLen * Math.cos(hip + knee);
    segments.push([hx, hy, kx, ky], [kx, ky, fx, fy]);
  };
  leg(j[1] ?? 0, j[2] ?? 0, -1);
  leg(j[3] ?? 0, j[4] ?? 0, +1);
  const chestX = rootX + 0.25 * scale * Math.sin(-torso);
  const chestY = rootY - 0.25 * scale * Math.cos(torso);
  segments.push([rootX, rootY, chestX, chestY]);
  const headX = chestX + 0.15 * scale * Math.sin(-torso);
  const headY = chestY - 0.15 * scale * Math.cos(torso);
  const arm = (shoulder: number, side: number) => {
    const ax = chestX + side * 4;
    const ay = chestY;
    const wx = ax + 0.25 * scale * Math.sin(shoulder);
    const wy = ay + 0.25 * scale * Math.cos(shoulder);
    segments.push([ax, ay, wx, wy]);
  };
  arm(j[5] ?? 0, -1);
  arm(j[6] ?? 0, +1);

  ctx.strokeStyle = "#9be564";
  ctx.lineWidth = 3;
  for (const [x1, y1, x2, y2] of segments) {
    ctx.beginPath();
    ctx.moveTo(x1, y1);
    ctx.lineTo(x2, y2);
    ctx.stroke();
  }
  ctx.fillStyle = "#9be564";
  ctx.beginPath();
  ctx.arc(headX, headY, 8, 0, 2 * Math.PI);
  ctx.fill();
}

function drawBadges(ctx: Ctx2D, snap: SessionSnapshot, width: number): void {
  ctx.font = "13px monospace";
  const state = snap.lastState;
  const items: [string, string][] = [];
  items.push([
    snap.connection,
    snap.connection === "connected" ? "#9be564" : snap.connection === "closed" ? "#ef476f" : "#ffd166",
  ]);
  if (snap.stale) items.push(["STALE STREAM", "#ef476f"]);
  if (state) {
    const lag = snap.lastSentSeq - state.applied_seq;
    items.push([`seq ${state.applied_seq}/${snap.lastSentSeq}${lag > 0 ? ` (lag ${lag})` : ""}`, lag > 0 ? "#ffd166" : "#8892a0"]);
    items.push([`t=${state.time_s.toFixed(2)}s`, "#8892a0"]);
    const misses = Object.values(state.deadline_misses).reduce((a, b) => a + b, 0);
    if (misses > 0) items.push([`deadline misses ${misses}`, "#ef476f"]);
    if (state.applied_warnings.length > 0) items.push([`clamped: ${state.applied_warnings.join(",")}`, "#ffd166"]);
  }
  if (snap.rttMs !== null) items.push([`rtt ~${snap.rttMs.toFixed(0)}ms`, "#8892a0"]);
  if (snap.lastError) items.push([`error: ${snap.lastError}`, "#ef476f"]);
  let x = 10;
  for (const [text, color] of items) {
    ctx.fillStyle = color;
    ctx.fillText(text, x, 18);
    x += text.length * 8 + 18;
  }
}
