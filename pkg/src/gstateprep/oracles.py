"""Threshold oracles and the staircase approximations they induce."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Optional

import numpy as np

from .errors import AuditFailure
from .state import OraclePredicate
from .target import AccuracyParams, TargetSpec

if TYPE_CHECKING:
    from .schedule import Schedule


@dataclass(eq=False)
class OracleBank:
    """The oracles ``o_1 .. o_K`` (``K = 1/epsilon``) and their exact counts.

    ``o_k(x) = 1`` iff ``sqrt(p(x)) >= (1 - k*epsilon) / sqrt(eta*N)`` for
    ``x < N`` and 0 beyond. Because the thresholds decrease in ``k`` each x
    is described by a single integer, the first index that accepts it.
    """

    epsilon: Fraction
    N: int
    eta: float
    thresholds: np.ndarray = field(repr=False)
    first_index: np.ndarray = field(repr=False)
    exact_counts: np.ndarray = field(repr=False)

    @property
    def K(self) -> int:
        return self.epsilon.denominator

    @property
    def step(self) -> float:
        """Amplitude unit ``epsilon / sqrt(eta N)``."""
        return float(self.epsilon) / math.sqrt(self.eta * self.N)

    def n(self, k: int) -> int:
        """Exact number of solutions of ``o_k`` (1-based)."""
        return int(self.exact_counts[k - 1])

    def accepts(self, k: int, x: int) -> bool:
        return x < self.N and bool(self.first_index[x] <= k)

    def mask(self, k: int, size: Optional[int] = None) -> np.ndarray:
        size = self.N if size is None else size
        out = np.zeros(size, dtype=bool)
        out[: self.N] = self.first_index <= k
        return out

    def predicate(self, k: int) -> OraclePredicate:
        return OraclePredicate(mask=self.first_index <= k)


def build_oracles(spec: TargetSpec, params: AccuracyParams) -> OracleBank:
    K = params.inv_epsilon
    eps = float(params.epsilon)
    scale = 1.0 / math.sqrt(spec.eta * spec.N)
    k = np.arange(1, K + 1)
    thresholds = (1.0 - eps * k) * scale
    thresholds[-1] = 0.0  # 1 - K*eps is exactly zero
    amp = np.sqrt(spec.prob)
    # thresholds decrease, so the first accepting k is a search on the negated array;
    # side="left" keeps the >= comparison exact
    first = np.searchsorted(-thresholds, -amp, side="left") + 1
    counts = np.cumsum(np.bincount(first, minlength=K + 2)[1 : K + 1])
    return OracleBank(params.epsilon, spec.N, spec.eta, thresholds, first.astype(np.int64), counts.astype(np.int64))


def p_prime_amplitudes(bank: OracleBank) -> np.ndarray:
    """``sqrt(p'(x))`` for every ``x < N``."""
    j = bank.first_index
    out = (1.0 - float(bank.epsilon) * j) / math.sqrt(bank.eta * bank.N)
    out[j >= bank.K] = 0.0
    return out


def p_prime(spec: TargetSpec, bank: OracleBank, x: int) -> float:
    """Staircase amplitude from the full oracle list at ``x``."""
    if not 0 <= x < spec.N:
        raise IndexError(x)
    return float(p_prime_amplitudes(bank)[x])


def selected_level(schedule: "Schedule", bank: OracleBank) -> np.ndarray:
    """For each ``x < N`` the (1-based) selected oracle that first accepts it, or ``T+1``."""
    f = np.asarray(schedule.f, dtype=np.int64)
    return np.searchsorted(f, bank.first_index, side="left") + 1


def p_double_prime_amplitudes(schedule: "Schedule", bank: OracleBank) -> np.ndarray:
    """``sqrt(p''(x))`` for every ``x < N``: ``B_{k,T}`` on the k-th selected step."""
    levels = selected_level(schedule, bank)
    tail = np.append(schedule.B_tail(), 0.0)  # B_{k,T} for k = 1..T, then 0
    return tail[levels - 1]


def p_double_prime(schedule: "Schedule", bank: OracleBank, x: int) -> float:
    if not 0 <= x < bank.N:
        raise IndexError(x)
    return float(p_double_prime_amplitudes(schedule, bank)[x])


@dataclass
class ExceptionReport:
    exception_set: np.ndarray = field(repr=False)
    mu: float
    N: int

    @property
    def size(self) -> int:
        return int(self.exception_set.size)

    @property
    def bound(self) -> float:
        return self.mu * self.N

    @property
    def holds(self) -> bool:
        return self.size <= self.bound


def exceptions(bank: OracleBank, schedule: "Schedule", params: AccuracyParams, check: bool = False) -> ExceptionReport:
    """Points where the two staircase approximations disagree.

    Comparison is on step indices, so it is exact: ``p'`` sits on step
    ``first_index`` and ``p''`` on step ``f_k`` (``K`` when no selected
    oracle accepts x); the step heights are strictly decreasing in the index.
    """
    levels = selected_level(schedule, bank)
    f_ext = np.append(np.asarray(schedule.f, dtype=np.int64), bank.K)
    idx_pp = f_ext[levels - 1]
    idx_p = np.minimum(bank.first_index, bank.K)
    ex = np.flatnonzero(idx_pp != idx_p)
    report = ExceptionReport(ex, params.mu, bank.N)
    if check and not report.holds:
        raise AuditFailure(
            f"{report.size} exceptional points exceed the bound mu*N = {report.bound:.3f}"
        )
    return report
