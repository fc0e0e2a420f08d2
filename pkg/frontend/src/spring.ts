// Critically damped spring gap model, mirrored from the server so the
// client can verify that a plan's keyframe matches the command it sent.

export const C_POSITION = 5.0 * Math.LN2;
export const C_HEADING = 20.0 * Math.LN2;
export const TARGET_HORIZON_S = 1.0;

export function springGap(x0: number, xT: number, v0: number, c: number, t: number): number {
  const a = xT - x0;
  const b = v0 + 0.5 * c * a;
  return (a + b * t) * Math.exp(-0.5 * c * t);
}

// wrap into (-pi, pi]
export function wrap(theta: number): number {
  let t = theta % (2 * Math.PI);
  if (t <= -Math.PI) t += 2 * Math.PI;
  if (t > Math.PI) t -= 2 * Math.PI;
  return t;
}

export interface RootState {
  x: number;
  y: number;
  heading: number;
  vx: number;
  vy: number;
  headingRate: number;
}

export interface RootKeyframe {
  x: number;
  y: number;
  heading: number;
}

/** Keyframe for a velocity command, matching the server construction. */
export function springTargetForVelocity(
  state: RootState,
  speed: number,
  directionRad: number,
  horizon = TARGET_HORIZON_S,
): RootKeyframe {
  const xT = state.x + speed * Math.cos(directionRad) * horizon;
  const yT = state.y + speed * Math.sin(directionRad) * horizon;
  const kx = xT - springGap(state.x, xT, -state.vx, C_POSITION, horizon);
  const ky = yT - springGap(state.y, yT, -state.vy, C_POSITION, horizon);
  const dh = wrap(directionRad - state.heading);
  const gapH = springGap(0.0, dh, -state.headingRate, C_HEADING, horizon);
  const kh = wrap(state.heading + dh - gapH);
  return { x: kx, y: ky, heading: kh };
}
