"""Solution-count estimates with a controlled accuracy/confidence contract.

Quantum counting is not simulated gate by gate. Phase estimation of a Grover
rotation has a known outcome law: the uniform start state splits evenly over
the two eigenvectors with eigenphases ``+-theta``, and each contributes a
Fejer-kernel peak around ``K theta / 2 pi`` on the ``K = 2^a_c`` outcomes.
Sampling that law directly preserves the statistics of the estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .oracles import OracleBank
from .state import ExecutionContext
from .target import AccuracyParams


def _fejer(delta: np.ndarray, K: int) -> np.ndarray:
    """``|K^-1 sum_j exp(2 pi i j delta / K)|^2`` evaluated stably."""
    # sin^2(pi delta) only needs the fractional part; reduce to keep precision
    frac = delta - np.round(delta)
    num = np.sin(np.pi * frac) ** 2
    wrapped = delta / K - np.round(delta / K)
    den = (K * np.sin(np.pi * wrapped)) ** 2
    out = np.empty_like(delta)
    small = np.abs(wrapped) < 1e-13
    out[~small] = num[~small] / den[~small]
    out[small] = 1.0
    return out


def phase_fraction(M: float, total: float) -> float:
    """Eigenphase of the Grover rotation in turns: ``sin^2(pi x) = M / total``."""
    ratio = min(1.0, max(0.0, M / total))
    return math.asin(math.sqrt(ratio)) / math.pi


@lru_cache(maxsize=64)
def _distribution_cached(M: float, total: float, precision_qubits: int) -> np.ndarray:
    K = 2**precision_qubits
    c = K * phase_fraction(M, total)
    b = np.arange(K, dtype=np.float64)
    dist = 0.5 * (_fejer(b - c, K) + _fejer(b + c, K))
    dist.flags.writeable = False
    return dist


def counting_distribution(M: float, total: float, precision_qubits: int) -> np.ndarray:
    """Probability of each phase-register outcome ``b in [0, 2^precision_qubits)``."""
    if not 0 <= M <= total:
        raise ValueError(f"need 0 <= M <= total, got M={M}, total={total}")
    if precision_qubits < 1:
        raise ValueError("need at least one precision qubit")
    return _distribution_cached(float(M), float(total), int(precision_qubits))


def decode(b, total: float, precision_qubits: int):
    """Count estimate ``total * sin^2(pi b / 2^precision_qubits)`` for outcome(s) ``b``."""
    K = 2**precision_qubits
    return total * np.sin(np.pi * np.asarray(b, dtype=np.float64) / K) ** 2


def contract_probability(M: float, total: float, precision_qubits: int, tolerance: float) -> float:
    """Exact probability that the decoded estimate lands strictly within ``tolerance`` of M."""
    dist = counting_distribution(M, total, precision_qubits)
    est = decode(np.arange(dist.size), total, precision_qubits)
    return float(dist[np.abs(est - M) < tolerance].sum())


@dataclass
class CountEstimates:
    values: np.ndarray
    mode: str
    draws: list = field(default_factory=list)
    exact: Optional[np.ndarray] = field(default=None, repr=False)
    calls: int = 0

    def errors(self) -> np.ndarray:
        """``|n~_k - n_k|`` (needs the exact counts: simulator privilege)."""
        return np.abs(self.values - self.exact)

    def in_contract(self, eta_c, N: int) -> np.ndarray:
        return self.errors() < float(eta_c) * N

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "values": [float(v) for v in self.values],
            "exact": None if self.exact is None else [int(v) for v in self.exact],
            "draws": [int(b) for b in self.draws],
            "calls": self.calls,
        }


def estimate_count(
    k: int,
    bank: OracleBank,
    params: AccuracyParams,
    rng: Optional[np.random.Generator],
    ctx: Optional[ExecutionContext] = None,
) -> tuple[float, Optional[int]]:
    """Estimate of ``n_k`` and the raw outcome it came from (``None`` in exact mode)."""
    n_k = bank.n(k)
    if params.counting_mode == "exact":
        return float(n_k), None
    if rng is None:
        raise ValueError("sampled counting needs a random generator")
    total = 2 * bank.N  # counting runs on the doubled domain
    dist = counting_distribution(n_k, total, params.a_c)
    cdf = np.cumsum(dist)
    b = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    b = min(b, dist.size - 1)
    if ctx is not None:
        ctx.counting_calls += 2**params.a_c - 1
    return float(decode(b, total, params.a_c)), b


def estimate_all(
    bank: OracleBank,
    params: AccuracyParams,
    rng: Optional[np.random.Generator],
    ctx: Optional[ExecutionContext] = None,
) -> CountEstimates:
    K = bank.K
    streams = rng.spawn(K) if (rng is not None and params.counting_mode == "sampled") else [None] * K
    values = np.empty(K)
    draws = []
    before = ctx.counting_calls if ctx is not None else 0
    local = ExecutionContext() if ctx is None else ctx
    for k in range(1, K + 1):
        values[k - 1], b = estimate_count(k, bank, params, streams[k - 1], local)
        if b is not None:
            draws.append(b)
    calls = local.counting_calls - before
    return CountEstimates(values, params.counting_mode, draws, bank.exact_counts.copy(), calls)
