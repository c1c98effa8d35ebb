"""Discrete-time simulation engine.

One run advances a fixed clock in resource-allocation steps of t_r
seconds. Every step: fire due packet requests and route them through the
configured association scheme, refresh RSS associations, recompute
equal-share allocations, transfer session bits at the step-start rates,
then move everybody and sample the observables. Turning decisions happen
only at direction-update boundaries (every t_m = k * t_r), right before
the motion they control.

Runs are deterministic: every entity draws from its own counter-derived
substream, so identical (config, master seed, run index) reproduces a
bit-identical log regardless of scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import association as assoc_mod
from . import dma
from .association import AssociationState, check_partition, rss_associate, throughput_associate
from .channel import (
    ChannelError,
    ChannelParams,
    avg_spectral_efficiency,
    interference_fullband,
    link_gains,
)
from .geometry import CellGrid, GeometryError, Rect, cell_center, cell_rect
from .metrics import LinkSample, MetricsLog, PacketRecord, StepSample
from .mobility import (
    POLICY_FREE,
    POLICY_HOVER,
    POLICY_RESTRICTED,
    ActionSet,
    DroneState,
    MobilityError,
    RwpParams,
    UserState,
    arc_step,
    build_action_set,
    initial_user_state,
    max_turn_angle,
    rwp_step,
)
from .traffic import PacketSession, advance_session, packet_throughput, sample_reading_time, start_session

MODELS = (POLICY_HOVER, POLICY_RESTRICTED, POLICY_FREE)
ASSOC_SCHEMES = (assoc_mod.SCHEME_RSS, assoc_mod.SCHEME_THROUGHPUT)

_RNG_DOMAIN_USER = 0
_RNG_DOMAIN_DRONE = 1


class ConfigError(ValueError):
    """Raised for an invalid or inconsistent simulation configuration."""


class EngineAuditError(AssertionError):
    """Raised when a per-step invariant audit fails."""


@dataclass
class SimConfig:
    """Every knob of one simulation run; defaults are the standard setup."""

    model: str = POLICY_HOVER
    assoc: str = assoc_mod.SCHEME_RSS
    speed_mps: float = 2.0
    accel_max: float = 4.0
    cells_per_side: int = 7
    cell_edge_m: float = 80.0
    users_per_cell: int = 5
    bandwidth_hz: float = 5e6
    height_m: float = 10.0
    p_tx_dbm: float = 24.0
    carrier_hz: float = 2e9
    alpha: float = 9.61
    beta: float = 0.16
    gamma_los: float = 2.09
    gamma_nlos: float = 3.75
    a_los_db: float = 41.1
    a_nlos_db: float = 33.0
    noise_figure_db: float = 9.0
    kappa_m: float = 200.0
    mean_reading_s: float = 40.0
    packet_mbyte: float = 4.0
    mbyte_bytes: float = 1e6
    t_m: float = 1.0
    t_r: float = 0.2
    n_directions: int = 21
    max_sweeps: int = 50
    duration_s: float = 800.0
    warmup_s: float = 40.0
    runs: int = 10
    seed: int = 1
    user_speed_min: float = 0.5
    user_speed_max: float = 2.0
    user_pause_max: float = 10.0
    inner: str | tuple = "center"
    collision_threshold_m: float = 10.0
    audit: bool = False

    # -- derived quantities ------------------------------------------------

    @property
    def n_cells(self) -> int:
        return self.cells_per_side * self.cells_per_side

    @property
    def n_drones(self) -> int:
        return self.n_cells  # one drone per cell

    @property
    def n_users(self) -> int:
        return self.n_cells * self.users_per_cell

    @property
    def area_side_m(self) -> float:
        return self.cells_per_side * self.cell_edge_m

    @property
    def theta_max(self) -> float:
        return max_turn_angle(self.accel_max, self.t_m, self.speed_mps)

    @property
    def steps_per_tm(self) -> int:
        return round(self.t_m / self.t_r)

    @property
    def n_steps(self) -> int:
        return round(self.duration_s / self.t_r)

    @property
    def packet_bits(self) -> float:
        return self.packet_mbyte * self.mbyte_bytes * 8.0

    @property
    def model_name(self) -> str:
        if self.model == POLICY_FREE:
            return f"free_{self.assoc}"
        return self.model

    @property
    def scheme(self) -> str:
        if self.model in (POLICY_HOVER, POLICY_RESTRICTED):
            return assoc_mod.SCHEME_LOCAL
        return self.assoc

    def channel_params(self) -> ChannelParams:
        return ChannelParams(
            alpha=self.alpha,
            beta=self.beta,
            a_los_db=self.a_los_db,
            a_nlos_db=self.a_nlos_db,
            gamma_los=self.gamma_los,
            gamma_nlos=self.gamma_nlos,
            p_tx_w=10.0 ** (self.p_tx_dbm / 10.0) * 1e-3,
            bandwidth_hz=self.bandwidth_hz,
            noise_figure_db=self.noise_figure_db,
            kappa_m=self.kappa_m,
            carrier_hz=self.carrier_hz,
        )

    def grid(self) -> CellGrid:
        return CellGrid.make(self.cells_per_side, self.cell_edge_m, self.inner)

    def rwp_params(self) -> RwpParams:
        return RwpParams(self.user_speed_min, self.user_speed_max, self.user_pause_max)

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.assoc not in ASSOC_SCHEMES:
            raise ConfigError(f"assoc must be one of {ASSOC_SCHEMES}, got {self.assoc!r}")
        if self.speed_mps <= 0:
            raise ConfigError("speed_mps must be positive")
        if self.accel_max < 0:
            raise ConfigError("accel_max must be non-negative")
        if self.cells_per_side < 1 or self.cell_edge_m <= 0:
            raise ConfigError("grid needs cells_per_side >= 1 and cell_edge_m > 0")
        if self.users_per_cell < 0:
            raise ConfigError("users_per_cell must be non-negative")
        if self.height_m <= 0:
            raise ConfigError("height_m must be positive")
        if self.mean_reading_s <= 0:
            raise ConfigError("mean_reading_s must be positive")
        if self.packet_mbyte < 0 or self.mbyte_bytes <= 0:
            raise ConfigError("packet size parameters must be positive")
        if self.t_r <= 0 or self.t_m <= 0:
            raise ConfigError("t_r and t_m must be positive")
        k = round(self.t_m / self.t_r)
        if k < 1 or abs(k * self.t_r - self.t_m) > 1e-9:
            raise ConfigError(
                f"t_m ({self.t_m}) must be an integer multiple of t_r ({self.t_r})"
            )
        n = round(self.duration_s / self.t_r)
        if self.duration_s < 0 or abs(n * self.t_r - self.duration_s) > 1e-6:
            raise ConfigError("duration_s must be a non-negative multiple of t_r")
        if self.warmup_s < 0:
            raise ConfigError("warmup_s must be non-negative")
        if self.duration_s > 0 and self.warmup_s >= self.duration_s:
            raise ConfigError("duration_s must exceed warmup_s")
        if self.n_directions < 3 or self.n_directions % 2 == 0:
            raise ConfigError("n_directions must be an odd integer >= 3")
        if self.max_sweeps < 0:
            raise ConfigError("max_sweeps must be non-negative")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not (0 < self.user_speed_min <= self.user_speed_max):
            raise ConfigError("need 0 < user_speed_min <= user_speed_max")
        if self.user_pause_max < 0:
            raise ConfigError("user_pause_max must be non-negative")
        if self.collision_threshold_m <= 0:
            raise ConfigError("collision_threshold_m must be positive")
        try:
            self.channel_params()
        except ChannelError as exc:
            raise ConfigError(str(exc)) from exc
        try:
            self.grid()
        except GeometryError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class _User:
    ident: int
    home_cell: int
    rect: Rect
    mob: UserState
    rng: np.random.Generator
    next_request: float
    session: PacketSession | None = None


def _entity_rng(master: int, run_index: int, domain: int, ident: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master, spawn_key=(run_index, domain, ident))
    return np.random.default_rng(seq)


def _init_drones(cfg: SimConfig, grid: CellGrid, run_index: int):
    area = grid.area_rect()
    drones: list[DroneState] = []
    rngs: list[np.random.Generator] = []
    for i in range(cfg.n_drones):
        rng = _entity_rng(cfg.seed, run_index, _RNG_DOMAIN_DRONE, i)
        cx, cy = cell_center(i, grid)
        region = area if cfg.model == POLICY_FREE else cell_rect(i, grid)
        heading = float(rng.uniform(0.0, 2.0 * math.pi))
        drones.append(
            DroneState(
                ident=i,
                x=cx,
                y=cy,
                heading=heading,
                speed=cfg.speed_mps,
                altitude=cfg.height_m,
                turn=0.0,
                policy=cfg.model,
                region=region,
                home_cell=i,
            )
        )
        rngs.append(rng)
    return drones, rngs


def _init_users(cfg: SimConfig, grid: CellGrid, run_index: int) -> list[_User]:
    rwp = cfg.rwp_params()
    users: list[_User] = []
    for cell in range(cfg.n_cells):
        rect = cell_rect(cell, grid)
        for s in range(cfg.users_per_cell):
            uid = cell * cfg.users_per_cell + s
            rng = _entity_rng(cfg.seed, run_index, _RNG_DOMAIN_USER, uid)
            mob = initial_user_state(cell, rect, rwp, rng)
            first = sample_reading_time(cfg.mean_reading_s, rng)
            users.append(_User(uid, cell, rect, mob, rng, first))
    return users


def _audit_assoc(assoc: AssociationState, users: Sequence[_User], bandwidth: float) -> None:
    active = [u.ident for u in users if u.session is not None and not u.session.is_complete]
    try:
        check_partition(assoc, active)
    except assoc_mod.AssociationError as exc:
        raise EngineAuditError(str(exc)) from exc
    for dbs, group in assoc.members.items():
        share = bandwidth / len(group)
        total = 0.0
        for u in group:
            b = assoc.allocations.get(u)
            if b != share:
                raise EngineAuditError(f"allocation of user {u} is {b}, expected {share}")
            total += b
        if total > bandwidth * (1.0 + 1e-9):
            raise EngineAuditError(f"drone {dbs} allocates {total} > {bandwidth}")


def _audit_world(cfg: SimConfig, grid: CellGrid, drones: Sequence[DroneState], users: Sequence[_User]) -> None:
    for d in drones:
        if cfg.model == POLICY_HOVER:
            cx, cy = cell_center(d.home_cell, grid)
            if d.x != cx or d.y != cy:
                raise EngineAuditError(f"hovering drone {d.ident} left its cell center")
        elif not d.region.contains(d.x, d.y, -1e-6):
            raise EngineAuditError(f"drone {d.ident} outside its region at ({d.x}, {d.y})")
    for u in users:
        if not u.rect.contains(u.mob.position.x, u.mob.position.y, -1e-9):
            raise EngineAuditError(f"user {u.ident} left home cell {u.home_cell}")


def run(config: SimConfig, run_index: int = 0) -> MetricsLog:
    """Execute one seeded run and return its metrics log."""
    config.validate()
    cfg = config
    grid = cfg.grid()
    cp = cfg.channel_params()
    rwp = cfg.rwp_params()
    inner_ids = grid.inner_cell_ids
    drones, drone_rngs = _init_drones(cfg, grid, run_index)
    users = _init_users(cfg, grid, run_index)
    assoc = AssociationState()

    scheme = cfg.scheme
    hover = cfg.model == POLICY_HOVER
    actions: ActionSet | None = None
    if not hover:
        actions = build_action_set(cfg.theta_max, cfg.n_directions)

    t_r = cfg.t_r
    t_m = cfg.t_m
    spt = cfg.steps_per_tm
    sub = 1.0 / spt
    n_steps = cfg.n_steps
    bandwidth = cfg.bandwidth_hz
    noise_fb = cp.noise_fullband_w
    warmup = cfg.warmup_s
    packet_bits = cfg.packet_bits
    mean_reading = cfg.mean_reading_s
    n_drones = cfg.n_drones
    threshold = cfg.collision_threshold_m

    log = MetricsLog(
        run_index=run_index,
        warmup_s=warmup,
        collision_threshold_m=threshold,
    )
    log.load_hist = [0] * (cfg.n_users + 1)
    pair_hist = np.zeros(int(cfg.area_side_m * 1.5) + 2, dtype=np.int64)
    iu, jv = np.triu_indices(n_drones, k=1)

    for k in range(n_steps):
        t = k * t_r

        # 1. fire due packet requests and route them
        for u in users:
            if u.session is None and u.next_request <= t:
                u.session = start_session(None, u.ident, u.next_request, packet_bits)
                if scheme == assoc_mod.SCHEME_LOCAL:
                    target = u.home_cell
                elif scheme == assoc_mod.SCHEME_RSS:
                    target = rss_associate(u.mob.position, drones, cp)
                else:
                    active_pos = {uid: users[uid].mob.position for uid in assoc.serving}
                    target = throughput_associate(
                        u.ident, u.mob.position, active_pos, drones, assoc, cp, t_r, t_m
                    )
                assoc.attach(u.ident, target)

        # 2. RSS users may re-pick their serving drone every interval
        if scheme == assoc_mod.SCHEME_RSS and assoc.serving:
            positions = {uid: users[uid].mob.position for uid in assoc.serving}
            assoc_mod.reassociate_all(scheme, assoc, positions, drones, cp)

        # 3. equal-share allocations
        assoc.recompute_allocations(bandwidth)
        if cfg.audit:
            _audit_assoc(assoc, users, bandwidth)

        # 4. transfer bits at step-start rates
        active_ids = assoc.active_ids()
        for uid in sorted(assoc.serving):
            u = users[uid]
            s = assoc.serving[uid]
            d = drones[s]
            px, py = u.mob.position
            g = link_gains(math.hypot(d.x - px, d.y - py), d.altitude, cp)
            ifb = interference_fullband((px, py), s, drones, active_ids, cp)
            se = avg_spectral_efficiency(g, ifb, noise_fb)
            throughput = assoc.allocations[uid] * se
            advance_session(u.session, throughput, t_r, t + t_r, s)
            if u.session.is_complete:
                sess = u.session
                if sess.request_time >= warmup:
                    log.packets.append(
                        PacketRecord(
                            user=uid,
                            cell=u.home_cell,
                            request_time=sess.request_time,
                            tau=sess.tau,
                            throughput_bps=packet_throughput(sess),
                        )
                    )
                assoc.detach(uid)
                u.next_request = sess.completion_time + sample_reading_time(mean_reading, u.rng)
                u.session = None

        # 5. direction decisions at t_m boundaries, then motion
        ne_flag = 0
        boundary = not hover and k % spt == 0
        if boundary:
            active_pos = {uid: users[uid].mob.position for uid in assoc.serving}
            game = dma.DirectionGame.build(drones, assoc.members, active_pos, actions, t_m, cp)
            init = dma.random_init(game, {p: drone_rngs[p] for p in game.players})
            joint, converged = dma.solve_nash(game, init, cfg.max_sweeps)
            if not converged:
                ne_flag = 1
            player_set = set(game.players)
            for p in game.players:
                drones[p] = replace(drones[p], turn=game.actions[p][joint[p]])
            for i in range(n_drones):
                if i not in player_set:
                    d = drones[i]
                    drones[i] = replace(
                        d, turn=dma.idle_direction(d, actions, t_m, drone_rngs[i])
                    )
        if not hover:
            for i in range(n_drones):
                d = drones[i]
                moved = arc_step(d, d.turn * sub, t_r)
                drones[i] = moved
                if not moved.region.contains(moved.x, moved.y, -1e-6):
                    log.border_violations += 1
        for u in users:
            u.mob = rwp_step(u.mob, t_r, u.rect, rwp, u.rng)

        # 6. sample the observables
        if cfg.audit:
            _audit_world(cfg, grid, drones, users)
        t_label = (k + 1) * t_r
        if t_label < warmup:
            continue
        active_ids = assoc.active_ids()
        max_load = 0
        for n in range(n_drones):
            load = assoc.load_of(n)
            log.load_hist[load] += 1
            if load > max_load:
                max_load = load
        if n_drones >= 2:
            xs = np.fromiter((d.x for d in drones), dtype=np.float64, count=n_drones)
            ys = np.fromiter((d.y for d in drones), dtype=np.float64, count=n_drones)
            dist = np.hypot(xs[iu] - xs[jv], ys[iu] - ys[jv])
            min_pair = float(dist.min())
            below = int((dist < threshold).sum())
            pair_hist += np.bincount(dist.astype(np.int64), minlength=pair_hist.size)
            n_pairs = dist.size
        else:
            min_pair = math.inf
            below = 0
            n_pairs = 0
        log.pairs_below += below
        log.pairs_total += n_pairs
        if boundary:
            log.ne_epochs += 1
            log.ne_nonconverged += ne_flag
        log.step_samples.append(
            StepSample(
                t=t_label,
                active_users=len(assoc.serving),
                active_dbs=len(active_ids),
                max_dbs_load=max_load,
                min_pair_m=min_pair,
                pairs_below=below,
                n_pairs=n_pairs,
                ne_nonconverged=ne_flag,
            )
        )
        for uid in sorted(assoc.serving):
            u = users[uid]
            if u.home_cell not in inner_ids:
                continue
            s = assoc.serving[uid]
            d = drones[s]
            px, py = u.mob.position
            r = math.hypot(d.x - px, d.y - py)
            g = link_gains(r, d.altitude, cp)
            ifb = interference_fullband((px, py), s, drones, active_ids, cp)
            b_u = assoc.allocations[uid]
            scale = b_u / bandwidth
            log.link_samples.append(
                LinkSample(
                    t=t_label,
                    user=uid,
                    cell=u.home_cell,
                    dbs=s,
                    distance_m=r,
                    rss_fullband_w=g.x_mean,
                    rx_w=scale * g.x_mean,
                    noise_w=cp.noise_density_w * b_u,
                    interference_w=scale * ifb,
                    se_bps_hz=avg_spectral_efficiency(g, ifb, noise_fb),
                )
            )

    log.pair_hist = [int(c) for c in pair_hist]
    return log


def run_batch(config: SimConfig, runs: int | None = None, workers: int = 1) -> list[MetricsLog]:
    """Independent runs with seeds split from the master seed by run index."""
    config.validate()
    n = config.runs if runs is None else runs
    if n < 1:
        raise ConfigError("runs must be >= 1")
    if workers <= 1:
        return [run(config, i) for i in range(n)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run, config, i) for i in range(n)]
        return [f.result() for f in futures]
