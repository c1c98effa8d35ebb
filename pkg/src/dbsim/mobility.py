"""Entity motion: random-waypoint users and constant-speed arc-turning drones.

Users do Random Waypoint inside their home cell: straight leg to a uniform
destination at a uniformly drawn speed, then a uniform pause. Drones fly at
constant speed; a direction change is executed as a circular arc whose total
heading change over one decision interval is bounded by the turning-angle
limit a_max * t_m / v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .geometry import Point2D, Rect

POLICY_HOVER = "hov"
POLICY_RESTRICTED = "restricted"
POLICY_FREE = "free"

# Containment of an arc is checked at this many equally spaced points along
# it (endpoint included). Matches the engine sub-step count at the default
# t_m / t_r ratio, so every sampled sub-position is a checked point.
ARC_CHECK_SAMPLES = 5

# Inward slack for containment checks; absorbs the rounding gap between a
# checked arc point and the same point reached through chained sub-steps.
_BORDER_MARGIN = 1e-9


class MobilityError(ValueError):
    """Raised for invalid kinematic arguments."""


# ---------------------------------------------------------------------------
# Users


@dataclass(frozen=True)
class RwpParams:
    speed_min: float = 0.5
    speed_max: float = 2.0
    pause_max: float = 10.0

    def __post_init__(self) -> None:
        if not (0 < self.speed_min <= self.speed_max):
            raise MobilityError("need 0 < speed_min <= speed_max")
        if self.pause_max < 0:
            raise MobilityError("pause_max must be non-negative")


@dataclass(frozen=True, slots=True)
class UserState:
    """One user's position and current waypoint leg.

    While position != destination the user is walking; afterwards it sits
    at the destination until pause_remaining runs out, then draws a fresh
    leg. The pause for a leg is drawn together with the leg itself.
    """

    position: Point2D
    home_cell: int
    destination: Point2D
    speed: float
    pause_remaining: float


def sample_waypoint(rect: Rect, rng) -> Point2D:
    """Uniform point inside a rectangle."""
    return Point2D(rng.uniform(rect.xmin, rect.xmax), rng.uniform(rect.ymin, rect.ymax))


def _new_leg(position: Point2D, home_cell: int, rect: Rect, params: RwpParams, rng) -> UserState:
    destination = sample_waypoint(rect, rng)
    speed = float(rng.uniform(params.speed_min, params.speed_max))
    pause = float(rng.uniform(0.0, params.pause_max))
    return UserState(
        position=position,
        home_cell=home_cell,
        destination=destination,
        speed=speed,
        pause_remaining=pause,
    )


def initial_user_state(home_cell: int, rect: Rect, params: RwpParams, rng) -> UserState:
    """Uniform starting position with a freshly drawn first leg."""
    position = sample_waypoint(rect, rng)
    return _new_leg(position, home_cell, rect, params, rng)


def rwp_step(user: UserState, dt: float, rect: Rect, params: RwpParams, rng) -> UserState:
    """Advance one user by dt seconds of Random Waypoint motion.

    Overshooting the destination clamps exactly onto it and the leftover
    time counts against the pause. A pause that expires mid-step draws the
    next leg; walking on it starts at the following step.
    """
    if dt <= 0:
        raise MobilityError("dt must be positive")
    px, py = user.position
    dx = user.destination.x - px
    dy = user.destination.y - py
    if dx != 0.0 or dy != 0.0:
        dist = math.hypot(dx, dy)
        step = user.speed * dt
        if step < dist:
            f = step / dist
            return replace(user, position=Point2D(px + f * dx, py + f * dy))
        leftover = dt - dist / user.speed
        pause = user.pause_remaining - leftover
        if pause > 0.0:
            return replace(user, position=user.destination, pause_remaining=pause)
        return _new_leg(user.destination, user.home_cell, rect, params, rng)
    pause = user.pause_remaining - dt
    if pause > 0.0:
        return replace(user, pause_remaining=pause)
    return _new_leg(user.position, user.home_cell, rect, params, rng)


# ---------------------------------------------------------------------------
# Drones


@dataclass(frozen=True, slots=True)
class DroneState:
    """Kinematic state of one drone base station.

    `turn` is the total heading change committed for the current decision
    interval; the engine executes it at a uniform rate across its
    sub-steps. `region` is the rectangle the drone must stay inside (its
    own cell when restricted, the whole area when free).
    """

    ident: int
    x: float
    y: float
    heading: float
    speed: float
    altitude: float
    turn: float
    policy: str
    region: Rect
    home_cell: int


@dataclass(frozen=True)
class ActionSet:
    """Symmetric, ordered set of candidate turning angles including 0."""

    angles: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.angles)

    def __iter__(self):
        return iter(self.angles)


def max_turn_angle(a_max: float, t_m: float, v: float) -> float:
    """Largest heading change (rad) achievable in one decision interval."""
    if v <= 0:
        raise MobilityError("speed must be positive for a turning drone")
    if a_max < 0 or t_m <= 0:
        raise MobilityError("need a_max >= 0 and t_m > 0")
    return a_max * t_m / v


def build_action_set(theta_max: float, count: int) -> ActionSet:
    """Discretize [-theta_max, theta_max] into `count` evenly spaced angles.

    A zero turning budget collapses the set to the single straight-ahead
    action.
    """
    if theta_max < 0:
        raise MobilityError("theta_max must be non-negative")
    if count < 3 or count % 2 == 0:
        raise MobilityError("count must be an odd integer >= 3")
    if theta_max == 0.0:
        return ActionSet((0.0,))
    spacing = 2.0 * theta_max / (count - 1)
    half = count // 2
    return ActionSet(tuple((k - half) * spacing for k in range(count)))


def arc_displacement(
    heading: float, speed: float, theta: float, dt: float
) -> tuple[float, float, float]:
    """Displacement and new heading after turning theta over dt at constant speed.

    theta = 0 is a straight leg; otherwise the drone follows a circular
    arc of radius speed * dt / |theta|, ending with its heading rotated by
    theta, displaced along the chord.
    """
    if theta == 0.0:
        leg = speed * dt
        return leg * math.cos(heading), leg * math.sin(heading), heading
    radius = speed * dt / abs(theta)
    chord = 2.0 * radius * math.sin(abs(theta) * 0.5)
    direction = heading + theta * 0.5
    return chord * math.cos(direction), chord * math.sin(direction), heading + theta


def arc_step(state: DroneState, theta: float, dt: float) -> DroneState:
    """New drone state after one arc of heading change theta over dt."""
    dx, dy, new_heading = arc_displacement(state.heading, state.speed, theta, dt)
    return replace(state, x=state.x + dx, y=state.y + dy, heading=new_heading)


def extrapolate_position(state: DroneState, dt: float, t_m: float) -> tuple[float, float]:
    """Position dt seconds ahead along the committed turn of this interval."""
    if state.policy == POLICY_HOVER or state.speed == 0.0:
        return state.x, state.y
    theta = state.turn * (dt / t_m)
    dx, dy, _ = arc_displacement(state.heading, state.speed, theta, dt)
    return state.x + dx, state.y + dy


def _arc_inside(state: DroneState, theta: float, dt: float) -> bool:
    n = ARC_CHECK_SAMPLES
    for k in range(1, n + 1):
        f = k / n
        dx, dy, _ = arc_displacement(state.heading, state.speed, theta * f, dt * f)
        if not state.region.contains(state.x + dx, state.y + dy, _BORDER_MARGIN):
            return False
    return True


def feasible_actions(state: DroneState, actions: ActionSet, dt: float) -> list[float]:
    """Angles whose whole arc over dt stays inside the drone's region.

    If no action stays inside, falls back to the single action whose arc
    endpoint lands nearest the region center, so a stray drone steers
    back in.
    """
    reach = state.speed * dt
    if state.region.contains(state.x, state.y, reach + _BORDER_MARGIN):
        return list(actions.angles)
    feasible = [theta for theta in actions.angles if _arc_inside(state, theta, dt)]
    if feasible:
        return feasible
    cx, cy = state.region.center
    best = None
    best_d = math.inf
    for theta in actions.angles:
        dx, dy, _ = arc_displacement(state.heading, state.speed, theta, dt)
        d = math.hypot(state.x + dx - cx, state.y + dy - cy)
        if d < best_d:
            best_d = d
            best = theta
    return [best]
