"""Oracle subset selection, step targets and closed-form Grover times.

Also hosts the closed-form profile predictor: given step widths and either
integer times or target heights it reproduces the piecewise-constant
amplitudes the staged Grover iterations produce, without simulating them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasibleProfileError, ScheduleError

log = logging.getLogger(__name__)


@dataclass
class StepQuantities:
    """Per-step quantities of the time formula (radians for angles)."""

    alpha: np.ndarray
    gamma_ini: np.ndarray
    gamma_fin: np.ndarray
    omega: np.ndarray
    clamped: list = field(default_factory=list)

    def continuous_times(self) -> np.ndarray:
        return (np.arcsin(self.gamma_fin) - np.arcsin(self.gamma_ini)) / self.omega


def _step_quantities(counts: Sequence[float], heights: Sequence[float], M: float) -> StepQuantities:
    """alpha_k, gamma_ini_k, gamma_fin_k and omega_k for widths ``counts``.

    ``heights`` plays the role of the realized features or the targets,
    depending on the caller; ``M = 2^a N`` is the full register size.
    """
    counts = np.asarray(counts, dtype=np.float64)
    heights = np.asarray(heights, dtype=np.float64)
    T = counts.size
    alpha = np.empty(T)
    g_ini = np.empty(T)
    g_fin = np.empty(T)
    omega = np.empty(T)
    clamped = []
    for k in range(T):
        Nk = counts[k]
        if not 0 < Nk < M:
            raise ScheduleError(f"step {k + 1}: width {Nk} outside (0, {M})")
        prev_n = counts[:k]
        prev_h = heights[:k]
        s_prev = float(np.dot(prev_n, prev_h))
        # sum_{s<k} (N_s - N_{s-1}) C_{s,k-1}^2 with C the tail sums of heights
        widths = np.diff(np.concatenate(([0.0], prev_n)))
        tails = np.cumsum(prev_h[::-1])[::-1]
        q = float(np.dot(widths, tails**2))
        num = s_prev**2 + Nk * (1.0 - q)
        if num <= 0:
            raise InfeasibleProfileError(
                f"step {k + 1}: earlier steps already exhaust the norm (alpha^2 <= 0)"
            )
        alpha[k] = math.sqrt(num / (Nk * (M - Nk)))
        denom = alpha[k] * math.sqrt(M * Nk)
        gi = s_prev / denom
        gf = (s_prev + Nk * heights[k]) / denom
        for name, val in (("ini", gi), ("fin", gf)):
            if abs(val) > 1.0:
                clamped.append((k + 1, name, val))
                log.info("step %d: gamma_%s=%r clamped to [-1, 1]", k + 1, name, val)
        g_ini[k] = min(1.0, max(-1.0, gi))
        g_fin[k] = min(1.0, max(-1.0, gf))
        omega[k] = math.acos(1.0 - 2.0 * Nk / M)
    return StepQuantities(alpha, g_ini, g_fin, omega, clamped)


@dataclass
class Schedule:
    """Selected oracles ``f_1 < ... < f_T`` (1-based) with their Grover times."""

    f: tuple
    K: int
    Ntilde: np.ndarray
    delta: np.ndarray
    t: tuple
    quantities: StepQuantities
    a: int
    N: int
    eta: float
    epsilon: Fraction

    @property
    def T(self) -> int:
        return len(self.f)

    @property
    def M(self) -> int:
        return (2**self.a) * self.N

    def B(self, s: int, k: int) -> float:
        """``sum_{j=s}^{k} delta_j`` (1-based, inclusive)."""
        return float(self.delta[s - 1 : k].sum())

    def B_tail(self) -> np.ndarray:
        """``B_{k,T}`` for k = 1..T, computed from the index form to avoid drift."""
        f = np.asarray(self.f, dtype=np.float64)
        return float(self.epsilon) * (self.K - f) / math.sqrt(self.eta * self.N)

    @property
    def total_calls(self) -> int:
        return int(sum(self.t))

    def to_dict(self) -> dict:
        q = self.quantities
        return {
            "T": self.T,
            "f": list(self.f),
            "Ntilde": [float(v) for v in self.Ntilde],
            "delta": [float(v) for v in self.delta],
            "t": list(self.t),
            "alpha": [float(v) for v in q.alpha],
            "gamma_ini": [float(v) for v in q.gamma_ini],
            "gamma_fin": [float(v) for v in q.gamma_fin],
            "omega": [float(v) for v in q.omega],
            "clamped": [list(c) for c in q.clamped],
        }


def select_oracles(estimates: Sequence[float], eta_g, N: int, K: Optional[int] = None) -> tuple[tuple, int]:
    """Pick oracle indices from count estimates ``estimates[j-1] = n~_j``.

    ``f_1`` is the first index whose estimate reaches ``eta_g * N``; each later
    ``f_k`` is the first index below ``K`` whose estimate strictly exceeds the
    previous pick. Returns ``(f, T)``; ``T == 0`` if nothing reaches the floor.
    """
    est = np.asarray(estimates, dtype=np.float64)
    K = est.size if K is None else K
    floor = float(eta_g) * N
    f = []
    for j in range(1, K + 1):
        if est[j - 1] >= floor:
            f.append(j)
            break
    if f:
        for j in range(f[0] + 1, K):
            if est[j - 1] > est[f[-1] - 1]:
                f.append(j)
    return tuple(f), len(f)


def step_targets(f: Sequence[int], K: int, epsilon, eta: float, N: int) -> np.ndarray:
    """``delta_k = epsilon (f_{k+1} - f_k) / sqrt(eta N)`` with ``f_{T+1} = K``."""
    if len(f) == 0:
        raise ScheduleError("no oracle selected; cannot form step targets")
    ext = np.append(np.asarray(f, dtype=np.float64), K)
    return float(epsilon) * np.diff(ext) / math.sqrt(eta * N)


def grover_times(Ntilde: Sequence[float], delta: Sequence[float], a: int, N: int) -> tuple[tuple, StepQuantities]:
    """Integer Grover times ``t_k`` from estimated widths and target heights."""
    Ntilde = np.asarray(Ntilde, dtype=np.float64)
    if Ntilde.size and (np.any(Ntilde <= 0) or np.any(np.diff(Ntilde) <= 0)):
        raise ScheduleError(f"estimated widths must be positive and strictly increasing: {Ntilde}")
    M = (2**a) * N
    if Ntilde.size and Ntilde[-1] >= M:
        raise ScheduleError(f"estimated width {Ntilde[-1]} reaches the register size {M}")
    q = _step_quantities(Ntilde, delta, M)
    t = tuple(int(math.floor(0.5 + v)) for v in q.continuous_times())
    return t, q


def build_schedule(estimates: Sequence[float], params, eta: float, N: int) -> Schedule:
    K = params.inv_epsilon
    f, T = select_oracles(estimates, params.eta_g, N, K)
    if T == 0:
        raise ScheduleError(
            "no oracle reaches eta_g*N; distribution too peaked or eta_g too large"
        )
    est = np.asarray(estimates, dtype=np.float64)
    Ntilde = est[np.asarray(f) - 1]
    delta = step_targets(f, K, params.epsilon, eta, N)
    t, q = grover_times(Ntilde, delta, params.a, N)
    return Schedule(f, K, Ntilde, delta, t, q, params.a, N, eta, params.epsilon)


# --------------------------------------------------------------------------
# closed-form profile
# --------------------------------------------------------------------------

@dataclass
class StepProfile:
    """Predicted staircase after each step.

    ``levels[k-1]`` holds ``(A_1^k, ..., A_k^k)`` and ``background[k-1]`` is
    ``B^k``. ``heights`` are the realized features (forward mode) or the
    requested ones (inverse mode, where ``tau`` holds continuous times).
    """

    counts: np.ndarray
    heights: np.ndarray
    background: np.ndarray
    levels: list
    alpha: np.ndarray
    omega: np.ndarray
    delta_ini: np.ndarray
    delta_fin: np.ndarray
    xi: np.ndarray
    tau: Optional[np.ndarray] = None


def background_level(counts: Sequence[float], heights: Sequence[float], M: float) -> float:
    """Non-negative root ``B^k`` of the normalization quadratic."""
    counts = np.asarray(counts, dtype=np.float64)
    heights = np.asarray(heights, dtype=np.float64)
    s = float(np.dot(counts, heights)) / M
    widths = np.diff(np.concatenate(([0.0], counts)))
    tails = np.cumsum(heights[::-1])[::-1]
    rest = (1.0 - float(np.dot(widths, tails**2))) / M
    disc = s * s + rest
    if disc < 0:
        raise InfeasibleProfileError(f"negative discriminant {disc!r}: heights over-normalize the state")
    return -s + math.sqrt(disc)


def predict_profile(
    counts: Sequence[float],
    a: int,
    N: int,
    times: Optional[Sequence[int]] = None,
    heights: Optional[Sequence[float]] = None,
) -> StepProfile:
    """Closed-form staircase for true widths ``counts``.

    Pass ``times`` (forward: realized heights from integer times) or
    ``heights`` (inverse: continuous times ``tau`` that hit those heights).
    """
    if (times is None) == (heights is None):
        raise ValueError("give exactly one of times or heights")
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts <= 0) or np.any(np.diff(counts) < 0):
        raise ScheduleError("true widths must be positive and non-decreasing")
    M = float((2**a) * N)
    T = counts.size
    h = np.zeros(T) if heights is None else np.asarray(heights, dtype=np.float64).copy()
    alpha = np.empty(T)
    omega = np.empty(T)
    d_ini = np.empty(T)
    d_fin = np.empty(T)
    xi = np.empty(T)
    tau = None if heights is None else np.empty(T)
    for k in range(T):
        q = _step_quantities(counts[: k + 1], h[: k + 1], M)
        alpha[k], omega[k] = q.alpha[k], q.omega[k]
        scale = math.sqrt(counts[k] / M)
        d_ini[k] = float(np.dot(counts[:k], h[:k])) / counts[k]
        xi[k] = -math.asin(max(-1.0, min(1.0, d_ini[k] / alpha[k] * scale)))
        if times is not None:
            d_fin[k] = alpha[k] / scale * math.sin(omega[k] * times[k] - xi[k])
            h[k] = d_fin[k] - d_ini[k]
        else:
            d_fin[k] = d_ini[k] + h[k]
            tau[k] = q.continuous_times()[k]
    background = np.empty(T)
    levels = []
    for k in range(T):
        background[k] = background_level(counts[: k + 1], h[: k + 1], M)
        tails = np.cumsum(h[: k + 1][::-1])[::-1]
        levels.append(background[k] + tails)
    return StepProfile(counts, h, background, levels, alpha, omega, d_ini, d_fin, xi, tau)
