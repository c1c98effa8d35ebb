"""Direction selection for the drones.

Serving drones (those with at least one active user) play a
non-cooperative game once per decision interval: each player's action is
a turning angle from its border-feasible action set, and its utility is
the average spectral efficiency its own active users would see at the end
of the interval, with every player advanced along its hypothesized arc
and users frozen in place. The game is solved by best-response sweeps
from a random joint action until a pure Nash equilibrium (no player wants
to deviate) or a sweep cap.

Idle drones pick a uniformly random feasible direction; hovering drones
never move at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .channel import ChannelParams, LinkGains, avg_spectral_efficiency, link_gains
from .mobility import (
    POLICY_HOVER,
    ActionSet,
    DroneState,
    arc_displacement,
    feasible_actions,
)


class GameError(RuntimeError):
    """Raised when the game is driven with an idle or unknown player."""


@dataclass
class DirectionGame:
    """One decision interval's game, frozen over a world snapshot.

    Joint actions are maps player id -> index into that player's action
    list. Endpoints of every (player, action) arc are precomputed;
    per-link gains are cached across best-response sweeps.
    """

    players: tuple[int, ...]
    actions: dict[int, list[float]]
    endpoints: dict[int, list[tuple[float, float]]]
    users_of: dict[int, tuple[int, ...]]
    user_xy: Mapping[int, tuple[float, float]]
    altitude: dict[int, float]
    cp: ChannelParams
    _pref: dict[int, list[int]] = field(default_factory=dict)
    _gains: dict[tuple[int, int, int], LinkGains] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        drones: Sequence[DroneState],
        members: Mapping[int, set[int]],
        user_xy: Mapping[int, tuple[float, float]],
        action_set: ActionSet,
        t_m: float,
        cp: ChannelParams,
    ) -> "DirectionGame":
        players = tuple(sorted(n for n, group in members.items() if group))
        actions: dict[int, list[float]] = {}
        endpoints: dict[int, list[tuple[float, float]]] = {}
        users_of: dict[int, tuple[int, ...]] = {}
        altitude: dict[int, float] = {}
        for p in players:
            drone = drones[p]
            feas = feasible_actions(drone, action_set, t_m)
            actions[p] = feas
            ends = []
            for theta in feas:
                dx, dy, _ = arc_displacement(drone.heading, drone.speed, theta, t_m)
                ends.append((drone.x + dx, drone.y + dy))
            endpoints[p] = ends
            users_of[p] = tuple(sorted(members[p]))
            altitude[p] = drone.altitude
        game = cls(
            players=players,
            actions=actions,
            endpoints=endpoints,
            users_of=users_of,
            user_xy=user_xy,
            altitude=altitude,
            cp=cp,
        )
        for p in players:
            order = sorted(
                range(len(actions[p])), key=lambda i: (abs(actions[p][i]), actions[p][i])
            )
            game._pref[p] = order
        return game

    def _link(self, user: int, player: int, action_idx: int) -> LinkGains:
        key = (user, player, action_idx)
        g = self._gains.get(key)
        if g is None:
            ex, ey = self.endpoints[player][action_idx]
            ux, uy = self.user_xy[user]
            g = link_gains(math.hypot(ex - ux, ey - uy), self.altitude[player], self.cp)
            self._gains[key] = g
        return g

    def utility(self, p: int, joint: Mapping[int, int]) -> float:
        """Mean end-of-interval spectral efficiency of player p's users."""
        users = self.users_of.get(p)
        if not users:
            raise GameError(f"drone {p} is not a player")
        cp = self.cp
        kappa_sq = cp.kappa_sq
        noise_fb = cp.noise_fullband_w
        own_idx = joint[p]
        total = 0.0
        for u in users:
            ux, uy = self.user_xy[u]
            interference = 0.0
            for q in self.players:
                if q == p:
                    continue
                ex, ey = self.endpoints[q][joint[q]]
                dx = ex - ux
                dy = ey - uy
                if dx * dx + dy * dy <= kappa_sq:
                    interference += self._link(u, q, joint[q]).x_mean
            total += avg_spectral_efficiency(self._link(u, p, own_idx), interference, noise_fb)
        return total / len(users)

    def best_response(self, p: int, joint: Mapping[int, int]) -> int:
        """Utility-maximizing action index against the others' current actions.

        Ties prefer the smallest turn magnitude, a negative turn before
        the positive one of equal size.
        """
        scratch = dict(joint)
        best_idx = -1
        best_val = -math.inf
        for idx in self._pref[p]:
            scratch[p] = idx
            val = self.utility(p, scratch)
            if val > best_val:
                best_val = val
                best_idx = idx
        return best_idx


def solve_nash(
    game: DirectionGame, init: Mapping[int, int], max_sweeps: int = 50
) -> tuple[dict[int, int], bool]:
    """Best-response dynamics from a given initial joint action.

    Players update in ascending id order; a full sweep without any change
    certifies a pure Nash equilibrium. Hitting the sweep cap returns the
    last joint action with converged = False.
    """
    joint = {p: init[p] for p in game.players}
    if not game.players:
        return joint, True
    converged = False
    for _ in range(max_sweeps):
        changed = False
        for p in game.players:
            br = game.best_response(p, joint)
            if br != joint[p]:
                joint[p] = br
                changed = True
        if not changed:
            converged = True
            break
    return joint, converged


def random_init(game: DirectionGame, rngs: Mapping[int, object]) -> dict[int, int]:
    """Uniform random action per player, drawn from that player's own stream."""
    return {p: int(rngs[p].integers(len(game.actions[p]))) for p in game.players}


def idle_direction(drone: DroneState, action_set: ActionSet, dt: float, rng) -> float:
    """Uniform random choice among the drone's border-feasible turns."""
    feasible = feasible_actions(drone, action_set, dt)
    return feasible[int(rng.integers(len(feasible)))]


def hov_policy(drone: DroneState) -> float:
    """Hovering drones never turn and never move."""
    if drone.policy != POLICY_HOVER:
        raise GameError("hov_policy applies to hovering drones only")
    return 0.0
