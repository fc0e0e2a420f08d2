"""Critically damped spring gap model for root and heading targets.

The gap ``x(t)`` is the remaining offset to a target value:

    x(t) = (xT - x0 + (v0 + (c/2)(xT - x0)) t) * exp(-(c/2) t)

with ``x(0) = xT - x0``, decaying to zero without oscillation.  ``v0``
is the initial rate of change of the gap, which is the negative of the
body's velocity toward the target.  The world-frame value at time t is
``target - x(t)``.

Default damping: ``5 ln 2`` for planar position, ``20 ln 2`` for
heading, giving exponential-envelope half-lives of 0.4 s and 0.1 s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rotations import wrap_angle

C_POSITION = 5.0 * np.log(2.0)
C_HEADING = 20.0 * np.log(2.0)
TARGET_HORIZON_S = 1.0


@dataclass(frozen=True)
class SpringParams:
    c_pos: float = C_POSITION
    c_heading: float = C_HEADING

    def __post_init__(self):
        if self.c_pos <= 0 or self.c_heading <= 0:
            raise ValueError("damping coefficients must be positive")


def spring_gap(x0, xT, v0, c, t):
    """Remaining offset at time t. Broadcasts over numpy inputs."""
    t = np.asarray(t, dtype=float)
    a = np.asarray(xT, dtype=float) - np.asarray(x0, dtype=float)
    b = np.asarray(v0, dtype=float) + 0.5 * c * a
    return (a + b * t) * np.exp(-0.5 * c * t)


def spring_gap_derivatives(x0, xT, v0, c, t):
    """(x, dx/dt, d2x/dt2) from the closed form."""
    t = np.asarray(t, dtype=float)
    a = np.asarray(xT, dtype=float) - np.asarray(x0, dtype=float)
    b = np.asarray(v0, dtype=float) + 0.5 * c * a
    e = np.exp(-0.5 * c * t)
    x = (a + b * t) * e
    dx = (b - 0.5 * c * (a + b * t)) * e
    ddx = (-c * b + 0.25 * c * c * (a + b * t)) * e
    return x, dx, ddx


def ode_residual(x0, xT, v0, c, t):
    """x'' + c x' + (c^2/4) x; identically zero for the closed form."""
    x, dx, ddx = spring_gap_derivatives(x0, xT, v0, c, t)
    return ddx + c * dx + 0.25 * c * c * x


def envelope_half_life(c: float) -> float:
    """Half-life of the exp(-(c/2) t) envelope: 2 ln 2 / c."""
    return 2.0 * np.log(2.0) / c


@dataclass(frozen=True)
class RootState:
    """Planar root state feeding the keyframe generator."""

    x: float
    y: float
    heading: float  # rad
    vx: float = 0.0
    vy: float = 0.0
    heading_rate: float = 0.0


@dataclass(frozen=True)
class RootTarget:
    """Desired root values one horizon ahead (world frame)."""

    x: float
    y: float
    heading: float


@dataclass(frozen=True)
class RootKeyframe:
    x: float
    y: float
    heading: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading])


def target_from_velocity(state: RootState, speed: float, direction: float,
                         horizon: float = TARGET_HORIZON_S) -> RootTarget:
    """Expected position after the horizon at the desired velocity; the
    desired heading is the travel direction."""
    return RootTarget(
        x=state.x + speed * np.cos(direction) * horizon,
        y=state.y + speed * np.sin(direction) * horizon,
        heading=direction,
    )


def spring_targets(state: RootState, target: RootTarget,
                   params: SpringParams = SpringParams(),
                   horizon: float = TARGET_HORIZON_S) -> RootKeyframe:
    """Root keyframe placed at ``target - gap(horizon)`` per quantity.

    Heading interpolates along the shortest arc; the result is wrapped
    to (-pi, pi].
    """
    kx = target.x - float(spring_gap(state.x, target.x, -state.vx, params.c_pos, horizon))
    ky = target.y - float(spring_gap(state.y, target.y, -state.vy, params.c_pos, horizon))
    dh = float(wrap_angle(target.heading - state.heading))
    gap_h = float(spring_gap(0.0, dh, -state.heading_rate, params.c_heading, horizon))
    kh = float(wrap_angle(state.heading + dh - gap_h))
    return RootKeyframe(x=kx, y=ky, heading=kh)
