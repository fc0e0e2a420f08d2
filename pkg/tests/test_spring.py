import time

import numpy as np
import pytest

from motionkit.spring import (
    C_HEADING,
    C_POSITION,
    RootState,
    RootTarget,
    SpringParams,
    envelope_half_life,
    ode_residual,
    spring_gap,
    spring_gap_derivatives,
    spring_targets,
    target_from_velocity,
)


def test_initial_gap_exact():
    rng = np.random.default_rng(0)
    for _ in range(100):
        x0, xT, v0 = rng.normal(size=3)
        c = float(rng.uniform(0.5, 20.0))
        assert spring_gap(x0, xT, v0, c, 0.0) == xT - x0


def test_decays_to_zero():
    rng = np.random.default_rng(1)
    for _ in range(100):
        x0, xT = rng.normal(size=2)
        c = float(rng.uniform(0.5, 20.0))
        x = spring_gap(x0, xT, 0.0, c, 100.0 / c)
        assert abs(x) < 1e-10 * max(abs(xT - x0), 1e-12)


def test_ode_residual_random_draws():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        x0, xT, v0 = rng.normal(scale=2.0, size=3)
        c = float(rng.uniform(0.2, 30.0))
        t = float(rng.uniform(0.0, 5.0))
        worst = max(worst, abs(float(ode_residual(x0, xT, v0, c, t))))
    elapsed = time.perf_counter() - start
    assert worst < 1e-9
    assert elapsed < 1.0


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(3)
    h = 1e-7
    for _ in range(50):
        x0, xT, v0 = rng.normal(size=3)
        c = float(rng.uniform(0.5, 10.0))
        t = float(rng.uniform(0.01, 3.0))
        x, dx, ddx = spring_gap_derivatives(x0, xT, v0, c, t)
        fd1 = (spring_gap(x0, xT, v0, c, t + h) - spring_gap(x0, xT, v0, c, t - h)) / (2 * h)
        assert abs(dx - fd1) < 1e-6 * max(1.0, abs(dx))


@pytest.mark.parametrize("c,expected", [(C_POSITION, 0.4), (C_HEADING, 0.1)])
def test_envelope_half_life(c, expected):
    t_half = envelope_half_life(c)
    assert abs(t_half - expected) < 1e-9
    # the exponential envelope halves every t_half: divide out the
    # polynomial factor (a + b t) and compare
    x0, xT, v0 = 0.0, 1.0, 0.3
    a = xT - x0
    b = v0 + 0.5 * c * a
    for t in (0.0, 0.2, 0.7):
        e1 = spring_gap(x0, xT, v0, c, t) / (a + b * t)
        e2 = spring_gap(x0, xT, v0, c, t + t_half) / (a + b * (t + t_half))
        assert abs(e2 / e1 - 0.5) < 1e-9


class TestSpringTargets:
    def test_zero_command_zero_velocity_stays(self):
        state = RootState(x=1.0, y=-2.0, heading=0.5)
        target = target_from_velocity(state, 0.0, 0.5)
        kf = spring_targets(state, target)
        assert np.isclose(kf.x, 1.0, atol=1e-12)
        assert np.isclose(kf.y, -2.0, atol=1e-12)
        assert np.isclose(kf.heading, 0.5, atol=1e-12)

    def test_velocity_mode_hand_value(self):
        # 1 m/s along x from the origin; the current velocity term cancels
        # the linear coefficient so the gap is a pure exponential:
        # gap(1) = 2^-2.5, keyframe x = 1 - 2^-2.5
        c = C_POSITION
        v_body = 0.5 * c * 1.0  # makes v0_gap + (c/2)(xT - x0) = 0
        state = RootState(x=0.0, y=0.0, heading=0.0, vx=v_body)
        target = target_from_velocity(state, 1.0, 0.0)
        kf = spring_targets(state, target)
        gap = 2.0 ** (-2.5)
        assert np.isclose(kf.x, 1.0 - gap, atol=1e-12)
        assert np.isclose(kf.x, 0.8232233047033631, atol=1e-12)

    def test_heading_wraps_shortest_arc(self):
        state = RootState(x=0.0, y=0.0, heading=3.0)
        target = RootTarget(x=0.0, y=0.0, heading=-3.0)
        kf = spring_targets(state, target)
        # initial gap is 2*pi - 6 = 0.283 rad, crossing pi, never 6 rad
        assert abs(kf.heading) > 2.9  # stays near the +-pi seam
        arc = (kf.heading - 3.0) % (2 * np.pi)
        assert 0.0 <= arc <= 2 * np.pi - 6.0 + 1e-9

    def test_initial_gap_magnitude_for_wrap(self):
        gap0 = spring_gap(0.0, 2 * np.pi - 6.0, 0.0, C_HEADING, 0.0)
        assert np.isclose(gap0, 0.28318530717958623, atol=1e-12)


def test_params_validated():
    with pytest.raises(ValueError):
        SpringParams(c_pos=-1.0)
