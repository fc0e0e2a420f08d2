"""Critically damped spring model: gap decay, half-lives, keyframes.

Run: python demos/demo_spring.py
"""

import numpy as np

from motionkit.spring import (
    C_HEADING,
    C_POSITION,
    RootState,
    envelope_half_life,
    ode_residual,
    spring_gap,
    spring_targets,
    target_from_velocity,
)


def sparkline(values, width=60):
    lo, hi = min(values), max(values)
    span = (hi - lo) or 1.0
    blocks = " .:-=+*#%@"
    return "".join(blocks[int((v - lo) / span * (len(blocks) - 1))] for v in values[:width])


def main():
    print("gap decay from rest, xT - x0 = 1:")
    for c, label in ((C_POSITION, "position (5 ln 2)"), (C_HEADING, "heading (20 ln 2)")):
        ts = np.linspace(0.0, 1.5, 60)
        xs = [float(spring_gap(0.0, 1.0, 0.0, c, t)) for t in ts]
        print(f"  {label:22s} |{sparkline(xs)}|")
        print(f"    envelope half-life: {envelope_half_life(c):.3f} s")

    print("\nclosed-form consistency, x'' + c x' + (c^2/4) x at random draws:")
    rng = np.random.default_rng(0)
    worst = max(
        abs(float(ode_residual(*rng.normal(size=3), float(rng.uniform(0.5, 25)), float(rng.uniform(0, 4)))))
        for _ in range(1000)
    )
    print(f"  worst residual over 1000 draws: {worst:.2e}")

    print("\nkeyframe placement, 1 m/s command along +x from rest:")
    state = RootState(x=0.0, y=0.0, heading=0.0)
    target = target_from_velocity(state, 1.0, 0.0)
    kf = spring_targets(state, target)
    print(f"  target after 1 s: x = {target.x:.3f}")
    print(f"  keyframe:         x = {kf.x:.5f} (gap at 1 s held back by the spring)")

    print("\nheading wrap, +3.0 rad to -3.0 rad goes the short way:")
    state = RootState(x=0.0, y=0.0, heading=3.0)
    kf = spring_targets(state, target_from_velocity(state, 0.0, -3.0))
    print(f"  keyframe heading = {kf.heading:+.4f} rad (stays near the pi seam)")


if __name__ == "__main__":
    main()
