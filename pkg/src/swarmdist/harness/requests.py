"""Poisson request arrivals, grouped into frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class Request:
    request_id: int
    frame: int
    source: int


@dataclass(frozen=True)
class RequestSchedule:
    counts: tuple[int, ...]
    requests: tuple[Request, ...]

    @property
    def frames(self) -> int:
        return len(self.counts)

    def by_frame(self):
        k = 0
        for f, c in enumerate(self.counts):
            yield f, self.requests[k : k + c]
            k += c


def generate_requests(rate: float, frames: int, seed: int, n_uavs: int = 1) -> RequestSchedule:
    """Per-frame request counts ~ Poisson(rate); each request gets a uniform random source UAV."""
    if not rate > 0:
        raise ConfigError("request rate must be positive")
    if frames < 0 or n_uavs < 1:
        raise ConfigError("frames must be >= 0 and n_uavs >= 1")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(rate, size=frames)
    sources = rng.integers(n_uavs, size=int(counts.sum()))
    requests = []
    k = 0
    for f, c in enumerate(counts):
        for _ in range(int(c)):
            requests.append(Request(k, f, int(sources[k])))
            k += 1
    return RequestSchedule(tuple(int(c) for c in counts), tuple(requests))
