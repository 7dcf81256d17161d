"""Counters and latency histograms for the gateway."""

from __future__ import annotations

import bisect
import threading
from collections import defaultdict

import numpy as np

BUCKETS_MS = (1, 2, 5, 10, 25, 50, 100, 250, 500, 1000, 2500, 5000, 10000)


def percentile(samples, q: float) -> float:
    """Nearest-rank percentile; non-decreasing in ``q`` by construction."""
    if not len(samples):
        return 0.0
    ordered = np.sort(np.asarray(samples, dtype=float))
    rank = max(1, int(np.ceil(q / 100.0 * len(ordered))))
    return float(ordered[rank - 1])


class LatencyHistogram:
    def __init__(self):
        self.samples: list[float] = []
        self.counts = [0] * (len(BUCKETS_MS) + 1)

    def observe(self, ms: float) -> None:
        self.samples.append(ms)
        self.counts[bisect.bisect_left(BUCKETS_MS, ms)] += 1

    def quantile(self, q: float) -> float:
        return percentile(self.samples, q)

    def snapshot(self) -> dict:
        return {
            "count": len(self.samples),
            "p50_ms": self.quantile(50),
            "p90_ms": self.quantile(90),
            "p99_ms": self.quantile(99),
            "buckets_ms": [
                {"le": b, "count": c} for b, c in zip(list(BUCKETS_MS) + ["+Inf"], self.counts)
            ],
        }


class Metrics:
    def __init__(self):
        self._lock = threading.Lock()
        self.counters: dict[str, int] = defaultdict(int)
        self.stages: dict[str, LatencyHistogram] = defaultdict(LatencyHistogram)

    def incr(self, name: str, by: int = 1) -> None:
        with self._lock:
            self.counters[name] += by

    def observe(self, stage: str, ms: float) -> None:
        with self._lock:
            self.stages[stage].observe(ms)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "counters": dict(sorted(self.counters.items())),
                "latency": {k: v.snapshot() for k, v in sorted(self.stages.items())},
            }
