"""Batch experiment front-end.

Resolves a configuration from defaults, an optional YAML file of flat
config keys, and command-line overrides; runs one point or a swept matrix
of points; and writes machine-readable outputs per point:

    packets.csv   one row per completed inner-cell packet
    samples.csv   one row per post-warmup t_r step (network aggregates)
    cdf_*.csv     empirical CDFs of the collected distributions
    summary.json  pooled statistics, resolved config, seeds, version

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 success
but some equilibrium searches hit the sweep cap.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from itertools import product
from pathlib import Path
from typing import Iterable, Sequence

import yaml

from . import __version__
from . import metrics as mx
from .engine import ConfigError, MetricsLog, SimConfig, run_batch
from .geometry import GeometryError

_INT_FIELDS = {"cells_per_side", "users_per_cell", "n_directions", "max_sweeps", "runs", "seed"}
_BOOL_FIELDS = {"audit"}
_STR_FIELDS = {"model", "assoc"}

_MODEL_ALIASES = {
    "free-rss": ("free", "rss"),
    "free_rss": ("free", "rss"),
    "free-throughput": ("free", "throughput"),
    "free_throughput": ("free", "throughput"),
}

_SWEEP_AXES = {"model": "model", "assoc": "assoc", "speed": "speed_mps", "accel": "accel_max"}


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _coerce(name: str, value):
    try:
        if name in _BOOL_FIELDS:
            if isinstance(value, bool):
                return value
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if name in _INT_FIELDS:
            return int(value)
        if name in _STR_FIELDS:
            return str(value).strip().lower()
        if name == "inner":
            if isinstance(value, str):
                return value.strip().lower()
            return tuple(int(v) for v in value)
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for config key '{name}': {value!r}") from exc


def _normalize_model(data: dict) -> None:
    model = data.get("model")
    if isinstance(model, str) and model.strip().lower() in _MODEL_ALIASES:
        m, a = _MODEL_ALIASES[model.strip().lower()]
        data["model"] = m
        data["assoc"] = a


def parse_config(path: str | None, overrides: dict | None = None) -> SimConfig:
    """Resolve a SimConfig from file values and overrides; overrides win."""
    data: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(p.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a flat key: value mapping")
        data.update(loaded)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    _normalize_model(data)
    known = {f.name for f in dataclasses.fields(SimConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    kwargs = {name: _coerce(name, value) for name, value in data.items()}
    cfg = SimConfig(**kwargs)
    try:
        cfg.validate()
    except GeometryError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def expand_sweep(base: SimConfig, sweep: str | None) -> list[SimConfig]:
    """Cross product of 'axis=v1,v2;axis2=...' entries applied to the base.

    Axes: model, assoc, speed, accel. Points that resolve to the same
    experiment (e.g. an assoc sweep under the hover model) collapse.
    """
    if not sweep:
        return [base]
    axes: list[tuple[str, list[str]]] = []
    for part in sweep.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad sweep entry {part!r}, expected axis=v1,v2,...")
        axis, _, raw = part.partition("=")
        axis = axis.strip().lower()
        if axis not in _SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {axis!r}; pick from {sorted(_SWEEP_AXES)}")
        values = [v.strip() for v in raw.split(",") if v.strip()]
        if not values:
            raise ConfigError(f"sweep axis {axis!r} has no values")
        axes.append((axis, values))
    points: dict[str, SimConfig] = {}
    for combo in product(*(vals for _, vals in axes)):
        data = {_SWEEP_AXES[axis]: value for (axis, _), value in zip(axes, combo)}
        _normalize_model(data)
        kwargs = {name: _coerce(name, value) for name, value in data.items()}
        cfg = dataclasses.replace(base, **kwargs)
        cfg.validate()
        points.setdefault(point_name(cfg), cfg)
    return list(points.values())


def point_name(cfg: SimConfig) -> str:
    return f"{cfg.model_name}_v{cfg.speed_mps:g}_a{cfg.accel_max:g}"


# ---------------------------------------------------------------------------
# Output writers


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _cdf_rows(values) -> list[tuple[float, float]]:
    try:
        return mx.empirical_cdf(values)
    except mx.MetricsError:
        return []


def _hist_cdf_rows(hist: Sequence[int], edge_offset: float) -> list[tuple[float, float]]:
    total = sum(hist)
    if total == 0:
        return []
    rows = []
    acc = 0
    for i, c in enumerate(hist):
        if c == 0:
            continue
        acc += c
        rows.append((i + edge_offset, acc / total))
    return rows


def write_point(out_dir: Path, cfg: SimConfig, logs: list[MetricsLog]) -> int:
    """Write every artifact for one experiment point; returns the number
    of direction games that failed to converge across its runs."""
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid()
    inner = grid.inner_cell_ids

    packet_rows = []
    for log in logs:
        for rec in mx.filter_inner(log.packets, inner):
            packet_rows.append(
                (log.run_index, rec.user, rec.cell, rec.request_time, rec.tau, rec.throughput_bps)
            )
    _write_csv(
        out_dir / "packets.csv",
        ("run", "user", "cell", "request_time_s", "tau_s", "throughput_bps"),
        packet_rows,
    )

    sample_rows = []
    for log in logs:
        for s in log.step_samples:
            sample_rows.append(
                (
                    log.run_index,
                    s.t,
                    s.active_users,
                    s.active_dbs,
                    s.max_dbs_load,
                    s.min_pair_m,
                    s.pairs_below,
                    s.n_pairs,
                    s.ne_nonconverged,
                )
            )
    _write_csv(
        out_dir / "samples.csv",
        (
            "run",
            "t_s",
            "active_users",
            "active_dbs",
            "max_dbs_load",
            "min_dbs_pair_m",
            "pairs_below_threshold",
            "n_pairs",
            "ne_nonconverged",
        ),
        sample_rows,
    )

    throughputs = mx.pooled_packet_throughputs(logs, inner)
    cdfs = {
        "packet_throughput": _cdf_rows(throughputs),
        "link_distance": _cdf_rows(mx.pooled_link_values(logs, "distance_m")),
        "received_signal": _cdf_rows(mx.pooled_link_values(logs, "rss_fullband_w")),
        "interference": _cdf_rows(mx.pooled_link_values(logs, "interference_w")),
        "active_dbs": _cdf_rows([s.active_dbs for log in logs for s in log.step_samples]),
        "dbs_load": _hist_cdf_rows(mx.combined_hist(logs, "load_hist"), 0.0),
        "dbs_distance": _hist_cdf_rows(mx.combined_hist(logs, "pair_hist"), 1.0),
    }
    for name, rows in cdfs.items():
        _write_csv(out_dir / f"cdf_{name}.csv", ("value", "cum_prob"), rows)

    below, total, frac = mx.collision_fraction(logs)
    ne_bad, ne_total, ne_frac = mx.ne_fraction(logs)
    per_run_counts = [len(mx.filter_inner(log.packets, inner)) for log in logs]
    per_run_means = []
    for log in logs:
        vals = mx.pooled_packet_throughputs([log], inner)
        per_run_means.append(math.fsum(vals) / len(vals) if vals else None)
    if throughputs:
        mean_bps, sem_bps = mx.mean_and_sem(throughputs)
    else:
        mean_bps, sem_bps = None, None
    link_medians = {}
    for key, attr in (
        ("distance_m", "distance_m"),
        ("received_signal_w", "rss_fullband_w"),
        ("interference_w", "interference_w"),
    ):
        vals = mx.pooled_link_values(logs, attr)
        link_medians[key] = mx.median(vals) if vals else None
    load_hist = mx.combined_hist(logs, "load_hist")
    steps = [s for log in logs for s in log.step_samples]
    summary = {
        "point": point_name(cfg),
        "code_version": __version__,
        "config": dataclasses.asdict(cfg),
        "master_seed": cfg.seed,
        "run_indices": [log.run_index for log in logs],
        "seed_scheme": "SeedSequence(master, spawn_key=(run_index, domain, entity_id))",
        "packets": {
            "count": len(throughputs),
            "mean_bps": mean_bps,
            "sem_bps": sem_bps,
            "per_run_counts": per_run_counts,
            "per_run_mean_bps": per_run_means,
        },
        "link_medians": link_medians,
        "loads": {
            "max": mx.max_from_hist(load_hist) if sum(load_hist) else None,
            "p99": mx.percentile_from_hist(load_hist, 0.99) if sum(load_hist) else None,
        },
        "active_dbs_mean": (
            math.fsum(s.active_dbs for s in steps) / len(steps) if steps else None
        ),
        "collision": {
            "threshold_m": cfg.collision_threshold_m,
            "pairs_below": below,
            "pairs_total": total,
            "fraction": frac,
        },
        "ne": {"epochs": ne_total, "nonconverged": ne_bad, "fraction": ne_frac},
        "border_violations": sum(log.border_violations for log in logs),
        "discarded_pending_sessions": "sessions unfinished at the horizon are not counted",
    }
    with open(out_dir / "summary.json", "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out_dir / "resolved_config.json", "w", newline="\n") as fh:
        json.dump(dataclasses.asdict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ne_bad


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbsim",
        description="Run drone-base-station network simulations and emit per-figure data.",
    )
    parser.add_argument("--config", help="YAML file of flat config keys")
    parser.add_argument("--model", help="hov | restricted | free | free_rss | free_throughput")
    parser.add_argument("--assoc", help="rss | throughput (free model only)")
    parser.add_argument("--speed", help="drone speed in m/s")
    parser.add_argument("--accel", help="maximum drone acceleration in m/s^2")
    parser.add_argument("--runs", help="independent runs per point")
    parser.add_argument("--duration", help="simulated seconds per run")
    parser.add_argument("--warmup", help="seconds excluded from metrics")
    parser.add_argument("--seed", help="master seed")
    parser.add_argument("--out", default="results", help="output directory (default: results)")
    parser.add_argument(
        "--sweep",
        help="experiment matrix, e.g. 'model=hov,restricted,free_rss,free_throughput;speed=2,4,6,8'",
    )
    parser.add_argument("--workers", type=int, default=1, help="parallel run workers per point")
    return parser


def _overrides_from(args: argparse.Namespace) -> dict:
    return {
        "model": args.model,
        "assoc": args.assoc,
        "speed_mps": args.speed,
        "accel_max": args.accel,
        "runs": args.runs,
        "duration_s": args.duration,
        "warmup_s": args.warmup,
        "seed": args.seed,
    }


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        base = parse_config(args.config, _overrides_from(args))
        points = expand_sweep(base, args.sweep)
    except ConfigError as exc:
        print(f"dbsim: config error: {exc}", file=sys.stderr)
        return 1
    out_root = Path(args.out)
    try:
        out_root.mkdir(parents=True, exist_ok=True)
        probe = out_root / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"dbsim: output directory not writable: {exc}", file=sys.stderr)
        return 2
    nonconverged = 0
    try:
        for cfg in points:
            logs = run_batch(cfg, workers=max(1, args.workers))
            nonconverged += write_point(out_root / point_name(cfg), cfg, logs)
    except ConfigError as exc:
        print(f"dbsim: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - batch tool reports and exits
        print(f"dbsim: runtime error: {exc}", file=sys.stderr)
        return 2
    if nonconverged:
        print(
            f"dbsim: warning: {nonconverged} direction game(s) hit the sweep cap",
            file=sys.stderr,
        )
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
