"""User association and equal-share bandwidth allocation.

Two selectable schemes govern which drone serves a user:

* RSS: the user independently picks the drone with the highest expected
  received signal at full bandwidth, and may re-pick at every resource
  allocation interval.
* Throughput: on each new packet request, a central computation picks the
  drone that maximizes the whole network's estimated throughput at the
  next allocation boundary (drones extrapolated along their current arcs,
  ongoing sessions kept where they are).

Within a drone, the total bandwidth is split equally among its active
users.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .channel import ChannelParams, LinkGains, avg_spectral_efficiency, link_gains
from .mobility import DroneState, extrapolate_position

SCHEME_RSS = "rss"
SCHEME_THROUGHPUT = "throughput"
SCHEME_LOCAL = "local"  # hover / restricted: always the home cell's drone


class AssociationError(RuntimeError):
    """Raised for invalid association operations."""


@dataclass
class AssociationState:
    """Serving map, per-drone active sets and current allocations.

    Every active user appears in `serving` and in exactly one member set;
    `members` keeps entries only for drones with at least one active user.
    """

    serving: dict[int, int] = field(default_factory=dict)
    members: dict[int, set[int]] = field(default_factory=dict)
    allocations: dict[int, float] = field(default_factory=dict)

    def attach(self, user: int, dbs: int) -> None:
        if user in self.serving:
            raise AssociationError(f"user {user} already associated")
        self.serving[user] = dbs
        self.members.setdefault(dbs, set()).add(user)

    def detach(self, user: int) -> None:
        dbs = self.serving.pop(user)
        group = self.members[dbs]
        group.discard(user)
        if not group:
            del self.members[dbs]
        self.allocations.pop(user, None)

    def move(self, user: int, dbs: int) -> None:
        if self.serving.get(user) == dbs:
            return
        self.detach(user)
        self.attach(user, dbs)

    def active_ids(self) -> list[int]:
        return sorted(self.members)

    def load_of(self, dbs: int) -> int:
        return len(self.members.get(dbs, ()))

    def recompute_allocations(self, bandwidth: float) -> None:
        self.allocations.clear()
        for dbs, group in self.members.items():
            self.allocations.update(allocate_equal(group, bandwidth))


def allocate_equal(users: Iterable[int], bandwidth: float) -> dict[int, float]:
    """Equal share of the drone bandwidth for every member of one set."""
    group = list(users)
    if not group:
        return {}
    share = bandwidth / len(group)
    return {u: share for u in group}


def expected_rss(
    user_xy: tuple[float, float], drone: DroneState, cp: ChannelParams
) -> float:
    """Expected full-band received power from one drone (watts).

    LoS-probability-weighted and evaluated at b_u = B, so the value does
    not depend on the drone's current load and any user can rank drones
    without knowing the others' choices.
    """
    r = math.hypot(drone.x - user_xy[0], drone.y - user_xy[1])
    return link_gains(r, drone.altitude, cp).x_mean


def rss_associate(
    user_xy: tuple[float, float], drones: Sequence[DroneState], cp: ChannelParams
) -> int:
    """Drone with the highest expected RSS; ties go to the lowest id."""
    if not drones:
        raise AssociationError("no drones to associate with")
    best = -1
    best_val = -math.inf
    for drone in drones:
        val = expected_rss(user_xy, drone, cp)
        if val > best_val:
            best_val = val
            best = drone.ident
    return best


def throughput_associate(
    new_user: int,
    new_xy: tuple[float, float],
    user_xy: Mapping[int, tuple[float, float]],
    drones: Sequence[DroneState],
    assoc: AssociationState,
    cp: ChannelParams,
    t_r: float,
    t_m: float,
) -> int:
    """Candidate drone maximizing the estimated system throughput.

    For every candidate i the hypothesis adds the new user to i's active
    set (all other sets unchanged), re-splits i's bandwidth, and evaluates
    the summed link throughputs with every drone advanced t_r ahead along
    its current arc and users frozen. A drone idle in a hypothesis
    radiates no interference in it. Ties go to the lowest id.
    """
    if not drones:
        raise AssociationError("no drones to associate with")
    bandwidth = cp.bandwidth_hz
    noise_fb = cp.noise_fullband_w
    kappa_sq = cp.kappa_sq

    pos1 = [extrapolate_position(d, t_r, t_m) for d in drones]
    altitude = [d.altitude for d in drones]
    active = assoc.active_ids()
    active_set = set(active)
    existing = sorted(assoc.serving)

    def gains_to(xy: tuple[float, float], i: int) -> LinkGains:
        px, py = pos1[i]
        return link_gains(math.hypot(px - xy[0], py - xy[1]), altitude[i], cp)

    def within_kappa(xy: tuple[float, float], i: int) -> bool:
        px, py = pos1[i]
        dx = px - xy[0]
        dy = py - xy[1]
        return dx * dx + dy * dy <= kappa_sq

    # New user: gains to every candidate, interference from currently
    # active drones (those radiate in every hypothesis).
    new_gains = [gains_to(new_xy, i) for i in range(len(drones))]
    new_interf_all = 0.0
    for j in active:
        if within_kappa(new_xy, j):
            new_interf_all += new_gains[j].x_mean

    # Existing users: serving gains and interference from the current
    # active set; cross terms to not-yet-active candidates are added
    # lazily per hypothesis.
    serve_gains: dict[int, LinkGains] = {}
    base_interf: dict[int, float] = {}
    for u in existing:
        s = assoc.serving[u]
        xy = user_xy[u]
        serve_gains[u] = gains_to(xy, s)
        acc = 0.0
        for j in active:
            if j != s and within_kappa(xy, j):
                acc += gains_to(xy, j).x_mean
        base_interf[u] = acc
    cross: dict[tuple[int, int], float] = {}

    best = -1
    best_val = -math.inf
    for i in range(len(drones)):
        new_share = bandwidth / (assoc.load_of(i) + 1)
        interf_new = new_interf_all
        if i in active_set and within_kappa(new_xy, i):
            interf_new -= new_gains[i].x_mean
        total = new_share * avg_spectral_efficiency(new_gains[i], interf_new, noise_fb)
        activates = i not in active_set
        for u in existing:
            s = assoc.serving[u]
            b_u = new_share if s == i else bandwidth / assoc.load_of(s)
            interf = base_interf[u]
            if activates:
                key = (u, i)
                add = cross.get(key)
                if add is None:
                    xy = user_xy[u]
                    add = gains_to(xy, i).x_mean if within_kappa(xy, i) else 0.0
                    cross[key] = add
                interf += add
            total += b_u * avg_spectral_efficiency(serve_gains[u], interf, noise_fb)
        if total > best_val:
            best_val = total
            best = i
    return best


def reassociate_all(
    scheme: str,
    assoc: AssociationState,
    user_xy: Mapping[int, tuple[float, float]],
    drones: Sequence[DroneState],
    cp: ChannelParams,
) -> None:
    """Refresh memberships at a resource allocation boundary.

    RSS lets every active user re-run its argmax; the throughput scheme
    only decides at packet-request instants, and the local scheme never
    moves anybody, so both are no-ops here.
    """
    if scheme == SCHEME_RSS:
        for user in sorted(assoc.serving):
            assoc.move(user, rss_associate(user_xy[user], drones, cp))
    elif scheme not in (SCHEME_THROUGHPUT, SCHEME_LOCAL):
        raise AssociationError(f"unknown association scheme {scheme!r}")


def check_partition(assoc: AssociationState, active_users: Iterable[int]) -> None:
    """Assert the active users are exactly partitioned across member sets."""
    expected = set(active_users)
    if set(assoc.serving) != expected:
        raise AssociationError("serving map does not cover the active users")
    seen: set[int] = set()
    for dbs, group in assoc.members.items():
        if not group:
            raise AssociationError(f"empty member set kept for drone {dbs}")
        for u in group:
            if u in seen:
                raise AssociationError(f"user {u} in two member sets")
            if assoc.serving.get(u) != dbs:
                raise AssociationError(f"user {u} set/serving mismatch")
            seen.add(u)
    if seen != expected:
        raise AssociationError("member sets do not cover the active users")
