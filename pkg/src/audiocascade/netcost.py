"""Simulated edge-to-cloud network.

RTTs are drawn from a lognormal fitted to two quantiles (p50, p95), or
held constant in ``scripted`` mode so latency tables reproduce exactly.
Each sample gets its own RNG stream derived from ``(seed, sample_id)``,
which keeps draws independent of worker scheduling.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from audiocascade.domain import CostLedger, to_us

Z95 = 1.6449


@dataclass(frozen=True)
class NetworkModel:
    mode: str = "lognormal"  # lognormal | scripted
    rtt_p50: float = 0.015
    rtt_p95: float = 0.045
    fixed_latency: Optional[float] = None
    uplink_bytes_per_s: Optional[float] = None
    downlink_bytes_per_s: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("lognormal", "scripted"):
            raise ValueError(f"unknown network mode {self.mode!r}")
        if not 0 < self.rtt_p50 <= self.rtt_p95:
            raise ValueError("need 0 < rtt_p50 <= rtt_p95")
        if self.mode == "scripted" and (self.fixed_latency is None or self.fixed_latency < 0):
            raise ValueError("scripted network mode needs a non-negative fixed_latency")
        for bw in (self.uplink_bytes_per_s, self.downlink_bytes_per_s):
            if bw is not None and bw <= 0:
                raise ValueError("bandwidth must be positive when given")

    @property
    def params(self) -> tuple[float, float]:
        return fit_lognormal(self.rtt_p50, self.rtt_p95)

    @classmethod
    def from_dict(cls, block: dict) -> NetworkModel:
        block = dict(block or {})
        bandwidth = block.pop("bandwidth", None)
        if bandwidth is not None:
            block.setdefault("uplink_bytes_per_s", bandwidth)
            block.setdefault("downlink_bytes_per_s", bandwidth)
        return cls(**block)


def fit_lognormal(p50: float, p95: float) -> tuple[float, float]:
    """Return ``(mu, sigma)`` of the lognormal with the given median and p95."""
    if p50 <= 0 or p95 <= 0:
        raise ValueError("quantiles must be positive")
    if p95 < p50:
        raise ValueError("p95 must be >= p50")
    return math.log(p50), math.log(p95 / p50) / Z95


def sample_rng(seed: int, sample_id: str) -> np.random.Generator:
    digest = hashlib.sha256(sample_id.encode("utf-8")).digest()
    return np.random.default_rng([seed & 0xFFFFFFFF, int.from_bytes(digest[:8], "little")])


def sample_rtt(model: NetworkModel, rng: np.random.Generator) -> float:
    if model.mode == "scripted":
        return float(model.fixed_latency)
    mu, sigma = model.params
    if sigma == 0:
        return math.exp(mu)
    return float(rng.lognormal(mu, sigma))


def sample_rtts(model: NetworkModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """Vectorised draws; same stream as ``n`` calls to :func:`sample_rtt`."""
    if model.mode == "scripted":
        return np.full(n, float(model.fixed_latency))
    mu, sigma = model.params
    if sigma == 0:
        return np.full(n, math.exp(mu))
    return rng.lognormal(mu, sigma, size=n)


def charge_transfer(ledger: CostLedger, direction: str, payload_bytes: int, model: NetworkModel,
                    rng: np.random.Generator, *, include_rtt: bool = True) -> CostLedger:
    """Charge one transfer to the ledger's network stage.

    A request/response pair is charged as one RTT: the request carries it,
    the response only adds its transfer time.
    """
    if payload_bytes < 0:
        raise ValueError("payload_bytes must be >= 0")
    if direction == "cloud_bound":
        bandwidth = model.uplink_bytes_per_s
        counters = dict(cloud_bound_bytes=payload_bytes)
    elif direction == "device_bound":
        bandwidth = model.downlink_bytes_per_s
        counters = dict(device_bound_bytes=payload_bytes)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    latency_us = to_us(sample_rtt(model, rng)) if include_rtt else 0
    if bandwidth:
        latency_us += to_us(payload_bytes / bandwidth)
    return ledger.add("network", latency_us=latency_us, extend=True, **counters)
