// Browser entry point: DOM wiring around the panel/session/view logic.

import { CommandPanel } from "./panel.js";
import type { Mode } from "./protocol.js";
import { MODES } from "./protocol.js";
import { UiSession } from "./session.js";
import { WsTransport } from "./transport.js";
import { DEFAULT_VIEW, render } from "./view.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const url = params.get("ws") ?? `ws://${window.location.hostname}:8766`;

  const session = new UiSession();
  const transport = new WsTransport(url);
  const panel = new CommandPanel({
    nextSeq: (now) => session.nextSeq(now),
    send: (cmd) => transport.send(cmd),
  });

  transport.onOpen(() => {
    session.onOpen();
    panel.setConnected(true);
  });
  transport.onClose(() => {
    session.onClose();
    panel.setConnected(false);
  });
  transport.onMessage((msg) => session.onMessage(msg, Date.now()));

  const velocity = el<HTMLInputElement>("velocity");
  const direction = el<HTMLInputElement>("direction");
  const height = el<HTMLInputElement>("height");
  const styleSel = el<HTMLSelectElement>("style");
  const modeBox = el<HTMLDivElement>("modes");
  const readout = el<HTMLDivElement>("readout");

  for (const mode of MODES) {
    const btn = document.createElement("button");
    btn.textContent = mode;
    btn.onclick = () => {
      panel.update({ mode: mode as Mode });
      const [lo, hi] = panel.velocityBounds();
      velocity.min = String(lo);
      velocity.max = String(hi);
      if (Number(velocity.value) > hi) velocity.value = String(hi);
      refreshReadout();
    };
    modeBox.appendChild(btn);
  }

  const refreshReadout = () => {
    const v = panel.values;
    readout.textContent =
      `${v.mode} | ${Number(velocity.value).toFixed(2)} m/s @ ${direction.value} deg` +
      ` | pelvis ${Number(height.value).toFixed(2)} m`;
  };
  velocity.oninput = () => {
    panel.update({ velocity: Number(velocity.value) });
    refreshReadout();
  };
  direction.oninput = () => {
    panel.update({ directionDeg: Number(direction.value) });
    refreshReadout();
  };
  height.oninput = () => {
    panel.update({ height: Number(height.value) });
    refreshReadout();
  };
  styleSel.onchange = () => panel.update({ style: styleSel.value });

  const canvas = el<HTMLCanvasElement>("scene");
  canvas.width = DEFAULT_VIEW.width;
  canvas.height = DEFAULT_VIEW.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("no 2d context");

  const frame = () => {
    const snap = session.snapshot(Date.now());
    render(ctx, snap, DEFAULT_VIEW);
    if (snap.hello && styleSel.options.length <= 1) {
      for (const style of snap.hello.styles) {
        const opt = document.createElement("option");
        opt.value = style;
        opt.textContent = style;
        styleSel.appendChild(opt);
      }
    }
    requestAnimationFrame(frame);
  };
  refreshReadout();
  requestAnimationFrame(frame);
}

main();
