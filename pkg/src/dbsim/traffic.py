"""Packet traffic: exponential reading times between fixed-size downloads.

Each user alternates between reading (idle) and downloading one packet.
Reading times are exponential with mean `mean_reading_s`; a packet is a
fixed number of bits delivered at whatever link throughput the engine
computes step by step. The transmission time tau of a packet runs from its
request to the end of its download.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class TrafficError(RuntimeError):
    """Raised when the session state machine is driven out of order."""


@dataclass
class ReadingClock:
    """Next packet-request instant for one user; strictly increasing."""

    user_id: int
    next_request_time: float


@dataclass
class ServedInterval:
    """One contiguous service interval of a session.

    bits_before/bits_after are the session's remaining bits at the
    interval edges; chaining them makes delivered-bit accounting exact.
    """

    dbs_id: int
    t_start: float
    t_end: float
    bits_before: float
    bits_after: float

    @property
    def delivered(self) -> float:
        return self.bits_before - self.bits_after


@dataclass
class PacketSession:
    """One packet download from request to completion."""

    user_id: int
    request_time: float
    size_bits: float
    bits_remaining: float
    history: list[ServedInterval] = field(default_factory=list)
    completion_time: float | None = None

    @property
    def is_complete(self) -> bool:
        return self.completion_time is not None

    @property
    def tau(self) -> float:
        if self.completion_time is None:
            raise TrafficError("session still pending")
        return self.completion_time - self.request_time


def exponential_quantile(mean: float, u: float) -> float:
    """Inverse CDF of the exponential distribution with the given mean."""
    if mean <= 0:
        raise TrafficError("mean must be positive")
    if not 0.0 <= u < 1.0:
        raise TrafficError("u must lie in [0, 1)")
    return -mean * math.log1p(-u)


def sample_reading_time(mean: float, rng) -> float:
    """Exponential reading-time variate with the given mean."""
    return exponential_quantile(mean, rng.random())


def start_session(
    current: PacketSession | None, user_id: int, request_time: float, size_bits: float
) -> PacketSession:
    """Open a new download; a still-pending previous session is a scheduler bug.

    A zero-size packet completes instantly with tau = 0.
    """
    if current is not None and not current.is_complete:
        raise TrafficError(f"user {user_id} already has a pending session")
    if size_bits < 0:
        raise TrafficError("packet size must be non-negative")
    session = PacketSession(
        user_id=user_id,
        request_time=request_time,
        size_bits=size_bits,
        bits_remaining=size_bits,
    )
    if size_bits == 0:
        session.completion_time = request_time
    return session


def advance_session(
    session: PacketSession, throughput_bps: float, dt: float, now: float, dbs_id: int
) -> PacketSession:
    """Deliver throughput * dt bits over the step ending at `now`.

    Completion inside the step is located by linear interpolation at the
    instant the remaining bits hit zero. Zero throughput leaves the
    session untouched.
    """
    if session.is_complete:
        raise TrafficError("session already complete")
    if throughput_bps < 0:
        raise TrafficError("throughput must be non-negative")
    if throughput_bps == 0.0:
        return session
    before = session.bits_remaining
    capacity = throughput_bps * dt
    t_start = now - dt
    if before <= capacity:
        session.bits_remaining = 0.0
        session.completion_time = t_start + before / throughput_bps
        session.history.append(
            ServedInterval(dbs_id, t_start, session.completion_time, before, 0.0)
        )
    else:
        session.bits_remaining = before - capacity
        session.history.append(
            ServedInterval(dbs_id, t_start, now, before, session.bits_remaining)
        )
    return session


def packet_throughput(session: PacketSession) -> float:
    """Successfully transmitted bits over the time consumed (bps)."""
    if not session.is_complete:
        raise TrafficError("packet throughput is defined for completed sessions")
    tau = session.tau
    if tau <= 0:
        raise TrafficError("packet throughput undefined for tau = 0")
    return session.size_bits / tau
