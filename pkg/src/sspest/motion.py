"""Three-dimensional bicycle kinematics with Bezier steering rollouts.

World frame: x = range, y = lateral offset, z = depth (positive down).
The heading matrix is Rz(yaw) * Ry(-pitch) applied to the unit x axis,
so positive pitch drives the vehicle toward the surface.

Boundary semantics: depth reflects specularly (with pitch negation) at
the surface and bottom; range is clamped to the region. Every candidate
rollout therefore stays feasible; violations are counted so the planner
can penalize wall contact.

The integrator is vectorized over a batch of candidates (the planner
rolls out a whole population per generation); the scalar ``step`` is a
batch of one, so planned costs and executed motion agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import Region

# state columns in the batch integrator
_X, _Y, _Z, _V, _YAW, _PITCH = range(6)


@dataclass(frozen=True)
class AuvState:
    position: np.ndarray    # (x, y, z) m
    speed: float            # m/s
    yaw: float              # rad
    pitch: float            # rad

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, float))

    @property
    def range_depth(self) -> np.ndarray:
        return np.array([self.position[0], self.position[2]])

    def as_vector(self) -> np.ndarray:
        return np.array([*self.position, self.speed, self.yaw, self.pitch])


@dataclass(frozen=True)
class MotionLimits:
    delta_max: float = np.deg2rad(10.0)   # rad, steering bound
    a_max: float = 0.0                    # m/s^2
    v_min: float = 2.0
    v_max: float = 2.0
    wheelbase: float = 25.0               # m
    dt: float = 2.5                       # s

    def __post_init__(self):
        if min(self.delta_max, self.v_min, self.v_max,
               self.wheelbase, self.dt) <= 0 or self.a_max < 0:
            raise ValueError("invalid motion limits")


@dataclass(frozen=True)
class BezierSteering:
    """Quadratic Bezier control points for the two steering channels.

    The first control point of each channel is pinned to the previously
    executed steering; the free points are bounded by delta_max.
    """

    b_yaw: np.ndarray
    b_pitch: np.ndarray
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "b_yaw", np.asarray(self.b_yaw, float))
        object.__setattr__(self, "b_pitch", np.asarray(self.b_pitch, float))
        if self.b_yaw.shape != (3,) or self.b_pitch.shape != (3,):
            raise ValueError("each steering channel needs 3 control points")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1 step")

    def at(self, tau: float) -> tuple[float, float]:
        """Steering (yaw, pitch) at normalized time tau in [0, 1]."""
        w = _bezier_weights(tau)
        return float(w @ self.b_yaw), float(w @ self.b_pitch)


def _bezier_weights(tau: float) -> np.ndarray:
    return np.array([(1 - tau) ** 2, 2 * (1 - tau) * tau, tau ** 2])


def _deriv(x: np.ndarray, a, tan_yaw_rate, tan_pitch_rate) -> np.ndarray:
    """Time derivative of a (B, 6) state batch under constant actions."""
    v, yaw, pitch = x[:, _V], x[:, _YAW], x[:, _PITCH]
    cp = np.cos(pitch)
    out = np.empty_like(x)
    out[:, _X] = v * np.cos(yaw) * cp
    out[:, _Y] = v * np.sin(yaw) * cp
    out[:, _Z] = -v * np.sin(pitch)
    out[:, _V] = a
    out[:, _YAW] = v * tan_yaw_rate
    out[:, _PITCH] = v * tan_pitch_rate
    return out


def step_batch(x: np.ndarray, actions: np.ndarray, limits: MotionLimits,
               region: Region, substeps: int = 4):
    """One sampling period for a (B, 6) state batch.

    ``actions`` is (B, 3) of (acceleration, yaw steering, pitch
    steering), clamped to the limits. Returns (next_states, violated
    bool mask).
    """
    a = np.clip(actions[:, 0], -limits.a_max, limits.a_max)
    d_yaw = np.clip(actions[:, 1], -limits.delta_max, limits.delta_max)
    d_pitch = np.clip(actions[:, 2], -limits.delta_max, limits.delta_max)
    tan_yaw = np.tan(d_yaw) / limits.wheelbase
    tan_pitch = np.tan(d_pitch) / limits.wheelbase

    h = limits.dt / substeps
    for _ in range(substeps):
        k1 = _deriv(x, a, tan_yaw, tan_pitch)
        k2 = _deriv(x + 0.5 * h * k1, a, tan_yaw, tan_pitch)
        k3 = _deriv(x + 0.5 * h * k2, a, tan_yaw, tan_pitch)
        k4 = _deriv(x + h * k3, a, tan_yaw, tan_pitch)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        x[:, _V] = np.clip(x[:, _V], limits.v_min, limits.v_max)

    z = x[:, _Z]
    low, high = z < 0.0, z > region.max_depth
    depth_hit = low | high
    bound = np.where(low, 0.0, region.max_depth)
    z_ref = np.where(depth_hit, 2.0 * bound - z, z)
    x[:, _Z] = np.clip(z_ref, 0.0, region.max_depth)
    x[:, _PITCH] = np.where(depth_hit, -x[:, _PITCH], x[:, _PITCH])
    range_hit = (x[:, _X] < 0.0) | (x[:, _X] > region.max_range)
    x[:, _X] = np.clip(x[:, _X], 0.0, region.max_range)
    return x, depth_hit | range_hit


def step(state: AuvState, action, limits: MotionLimits,
         region: Region, substeps: int = 4):
    """Advance one sampling period under a constant (clamped) action.

    Returns (next_state, violated). Saturating semantics: out-of-bound
    actions are clamped, never rejected.
    """
    x, hit = step_batch(state.as_vector()[None, :], np.asarray(action, float)[None, :],
                        limits, region, substeps)
    x = x[0]
    nxt = AuvState(x[:3].copy(), float(x[_V]), float(x[_YAW]), float(x[_PITCH]))
    return nxt, bool(hit[0])


def rollout(state: AuvState, steering: BezierSteering,
            limits: MotionLimits, region: Region):
    """Apply the Bezier steering over the horizon.

    Steering for step k (1-based) is evaluated at tau = k / horizon, so
    the curve starts from the previously executed angle and reaches its
    final control point on the last step. Returns (positions (T, 2) of
    (range, depth), violations, states list incl. the start state).
    """
    t_steps = steering.horizon
    states = [state]
    positions = np.empty((t_steps, 2))
    violations = 0
    cur = state
    for k in range(1, t_steps + 1):
        d_yaw, d_pitch = steering.at(k / t_steps)
        cur, violated = step(cur, (0.0, d_yaw, d_pitch), limits, region)
        states.append(cur)
        positions[k - 1] = cur.range_depth
        violations += int(violated)
    return positions, violations, states


def rollout_batch(state: AuvState, steerings: list[BezierSteering],
                  limits: MotionLimits, region: Region):
    """Roll out many candidates from one start state.

    Returns (positions (B, T, 2), violations (B,)). Matches ``rollout``
    candidate for candidate.
    """
    b = len(steerings)
    t_steps = steerings[0].horizon
    x = np.tile(state.as_vector(), (b, 1))
    positions = np.empty((b, t_steps, 2))
    violations = np.zeros(b, int)
    b_yaw = np.array([s.b_yaw for s in steerings])
    b_pitch = np.array([s.b_pitch for s in steerings])
    actions = np.zeros((b, 3))
    for k in range(1, t_steps + 1):
        w = _bezier_weights(k / t_steps)
        actions[:, 1] = b_yaw @ w
        actions[:, 2] = b_pitch @ w
        x, hit = step_batch(x, actions, limits, region)
        positions[:, k - 1, 0] = x[:, _X]
        positions[:, k - 1, 1] = x[:, _Z]
        violations += hit
    return positions, violations
