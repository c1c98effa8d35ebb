"""Run observables and their summary statistics.

A MetricsLog holds everything one run produces: per-packet records,
per-step link samples for inner-cell users, per-step network aggregates,
and compact histograms for the per-drone load and drone-pair distance
distributions (pair distances are binned at 1 m so integer thresholds
stay exact).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class MetricsError(ValueError):
    """Raised for empty inputs where a statistic is undefined."""


@dataclass(frozen=True, slots=True)
class PacketRecord:
    """One completed packet download."""

    user: int
    cell: int
    request_time: float
    tau: float
    throughput_bps: float


@dataclass(frozen=True, slots=True)
class LinkSample:
    """Radio state of one active link at one sampling instant."""

    t: float
    user: int
    cell: int
    dbs: int
    distance_m: float
    rss_fullband_w: float
    rx_w: float
    noise_w: float
    interference_w: float
    se_bps_hz: float


@dataclass(frozen=True, slots=True)
class StepSample:
    """Network-wide aggregates at one sampling instant."""

    t: float
    active_users: int
    active_dbs: int
    max_dbs_load: int
    min_pair_m: float
    pairs_below: int
    n_pairs: int
    ne_nonconverged: int


@dataclass
class MetricsLog:
    """Everything observed during one run (post warm-up)."""

    run_index: int
    warmup_s: float
    collision_threshold_m: float
    packets: list[PacketRecord] = field(default_factory=list)
    link_samples: list[LinkSample] = field(default_factory=list)
    step_samples: list[StepSample] = field(default_factory=list)
    load_hist: list[int] = field(default_factory=list)
    pair_hist: list[int] = field(default_factory=list)
    pairs_below: int = 0
    pairs_total: int = 0
    ne_epochs: int = 0
    ne_nonconverged: int = 0
    border_violations: int = 0


def _inner_ids(inner) -> frozenset[int]:
    ids = getattr(inner, "inner_cell_ids", inner)
    return frozenset(ids)


def filter_inner(records: Iterable, inner) -> list:
    """Keep records whose user's home cell is an inner cell.

    `inner` is a CellGrid or any collection of cell ids; records need a
    `cell` attribute.
    """
    ids = _inner_ids(inner)
    return [rec for rec in records if rec.cell in ids]


def empirical_cdf(samples: Iterable[float]) -> list[tuple[float, float]]:
    """Step-function CDF of the samples, duplicates collapsed.

    Returns (value, P(X <= value)) pairs in increasing value order; the
    last probability is exactly 1.
    """
    data = sorted(samples)
    if not data:
        raise MetricsError("empirical_cdf needs at least one sample")
    n = len(data)
    out: list[tuple[float, float]] = []
    for i, v in enumerate(data):
        if i + 1 < n and data[i + 1] == v:
            continue
        out.append((v, (i + 1) / n))
    return out


def mean_packet_throughput(logs: Iterable[MetricsLog], inner) -> float:
    """Per-packet mean of the inner-cell packet throughputs, pooled over runs."""
    values = pooled_packet_throughputs(logs, inner)
    if not values:
        raise MetricsError("no completed inner-cell packets")
    return math.fsum(values) / len(values)


def collision_stat(samples: Iterable[float], threshold: float) -> float:
    """Fraction of pairwise distance samples below the threshold."""
    data = list(samples)
    if not data:
        raise MetricsError("collision_stat needs at least one sample")
    return sum(1 for d in data if d < threshold) / len(data)


# ---------------------------------------------------------------------------
# Aggregation helpers shared by the CLI and the verification suite


def pooled_packet_throughputs(logs: Iterable[MetricsLog], inner) -> list[float]:
    ids = _inner_ids(inner)
    return [
        rec.throughput_bps
        for log in logs
        for rec in log.packets
        if rec.cell in ids
    ]


def pooled_link_values(logs: Iterable[MetricsLog], attr: str) -> list[float]:
    return [getattr(s, attr) for log in logs for s in log.link_samples]


def median(values: Sequence[float]) -> float:
    if not values:
        raise MetricsError("median of empty data")
    data = sorted(values)
    n = len(data)
    mid = n // 2
    if n % 2:
        return data[mid]
    return 0.5 * (data[mid - 1] + data[mid])


def mean_and_sem(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        raise MetricsError("mean of empty data")
    n = len(values)
    m = math.fsum(values) / n
    if n == 1:
        return m, 0.0
    var = math.fsum((v - m) ** 2 for v in values) / (n - 1)
    return m, math.sqrt(var / n)


def combined_hist(logs: Iterable[MetricsLog], attr: str) -> list[int]:
    out: list[int] = []
    for log in logs:
        hist = getattr(log, attr)
        if len(hist) > len(out):
            out.extend([0] * (len(hist) - len(out)))
        for i, c in enumerate(hist):
            out[i] += c
    return out


def percentile_from_hist(hist: Sequence[int], q: float) -> int:
    """Smallest bin index whose cumulative count reaches the q quantile."""
    total = sum(hist)
    if total == 0:
        raise MetricsError("empty histogram")
    if not 0.0 < q <= 1.0:
        raise MetricsError("q must lie in (0, 1]")
    need = q * total
    acc = 0
    for i, c in enumerate(hist):
        acc += c
        if acc >= need:
            return i
    return len(hist) - 1


def max_from_hist(hist: Sequence[int]) -> int:
    top = -1
    for i, c in enumerate(hist):
        if c:
            top = i
    if top < 0:
        raise MetricsError("empty histogram")
    return top


def collision_fraction(logs: Iterable[MetricsLog]) -> tuple[int, int, float]:
    below = 0
    total = 0
    for log in logs:
        below += log.pairs_below
        total += log.pairs_total
    return below, total, (below / total if total else 0.0)


def ne_fraction(logs: Iterable[MetricsLog]) -> tuple[int, int, float]:
    bad = 0
    total = 0
    for log in logs:
        bad += log.ne_nonconverged
        total += log.ne_epochs
    return bad, total, (bad / total if total else 0.0)
