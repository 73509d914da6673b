"""
DBRu arrival processes for the emulated ONUs.

Every T-CONT owns an independent numpy ``Generator`` on the PCG64 bit
generator, seeded with ``SeedSequence(entropy=seed, spawn_key=(alloc_id,))``
so per-T-CONT streams are decorrelated and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

RNG_ALGORITHM = "numpy.PCG64/SeedSequence(entropy=seed, spawn_key=(alloc_id,))"


@dataclass(frozen=True)
class Poisson:
    rate_per_s: float

    def __post_init__(self):
        if not self.rate_per_s > 0:
            raise ConfigError("must be > 0", "rate_per_s")


@dataclass(frozen=True)
class CBR:
    interval_ns: int

    def __post_init__(self):
        if not self.interval_ns > 0:
            raise ConfigError("must be > 0", "interval_ns")


@dataclass(frozen=True)
class OnOff:
    """CBR arrivals every ``interval_ns`` during the first ``on_ns`` of each
    ``on_ns + off_ns`` period; silent otherwise."""

    on_ns: int
    off_ns: int
    interval_ns: int

    def __post_init__(self):
        for name in ("on_ns", "off_ns", "interval_ns"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be > 0", name)


@dataclass(frozen=True)
class Fixed:
    words: int

    def __post_init__(self):
        if not self.words > 0:
            raise ConfigError("must be > 0", "words")


@dataclass(frozen=True)
class UniformInt:
    lo: int
    hi: int

    def __post_init__(self):
        if not 0 < self.lo <= self.hi:
            raise ConfigError("need 0 < lo <= hi", "lo")


@dataclass(frozen=True)
class ArrivalProcess:
    kind: Poisson | CBR | OnOff
    size_dist: Fixed | UniformInt
    seed: int = 0


def make_rng(seed, alloc_id):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(alloc_id,))
    return np.random.Generator(np.random.PCG64(ss))


def _next_time(kind, rng, now_ns):
    if isinstance(kind, CBR):
        return now_ns + kind.interval_ns
    if isinstance(kind, Poisson):
        gap = rng.exponential(1e9 / kind.rate_per_s)
        return now_ns + max(1, int(round(gap)))
    period = kind.on_ns + kind.off_ns
    t = now_ns + kind.interval_ns
    if t % period >= kind.on_ns:
        t = (t // period + 1) * period
    return t


def _size(dist, rng):
    if isinstance(dist, Fixed):
        return dist.words
    return int(rng.integers(dist.lo, dist.hi, endpoint=True))


def next_event(proc, rng, now_ns):
    """Return ``(words, at_ns, rng)`` for the arrival following ``now_ns``."""
    at = _next_time(proc.kind, rng, now_ns)
    return _size(proc.size_dist, rng), at, rng


def arrivals(proc, alloc_id, until_ns):
    """Yield ``(at_ns, words)`` up to and including ``until_ns``."""
    rng = make_rng(proc.seed, alloc_id)
    now = 0
    while True:
        words, now, rng = next_event(proc, rng, now)
        if now > until_ns:
            return
        yield now, words
