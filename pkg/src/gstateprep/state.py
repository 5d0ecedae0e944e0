"""Dense state vectors and the primitive operations on them.

Amplitudes are stored as complex128. Auxiliary qubits are the most
significant bits of the register, so "all auxiliary qubits read 0" is the
same event as ``x < N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import DegenerateStateError, DimensionMismatchError, ResourceLimitError

DEFAULT_MAX_QUBITS = 26
NORM_TOL = 1e-10


@dataclass
class ExecutionContext:
    """Per-run counters and limits, threaded explicitly through operations."""

    max_qubits: int = DEFAULT_MAX_QUBITS
    oracle_calls: int = 0
    counting_calls: int = 0
    phase_ops: int = 0
    backend: Optional[str] = None


def check_qubits(num_qubits: int, max_qubits: int = DEFAULT_MAX_QUBITS) -> None:
    if num_qubits < 1:
        raise ValueError(f"need at least one qubit, got {num_qubits}")
    if num_qubits > max_qubits:
        need = (2**num_qubits) * 16
        raise ResourceLimitError(
            f"{num_qubits} qubits exceed the cap of {max_qubits}: "
            f"the state vector would need 2^{num_qubits} amplitudes "
            f"({need / 2**30:.2f} GiB as complex128)"
        )


class QuantumState:
    """Unit-norm vector of ``2**num_qubits`` complex amplitudes (read-only)."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes, check_norm: bool = True):
        amps = np.array(amplitudes, dtype=np.complex128, copy=True).ravel()
        dim = amps.shape[0]
        if dim < 2 or dim & (dim - 1):
            raise DimensionMismatchError(
                f"amplitude count {dim} is not a power of two >= 2"
            )
        if check_norm:
            norm = float(np.vdot(amps, amps).real)
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"state is not normalized: norm^2 = {norm!r}")
        amps.flags.writeable = False
        self.amplitudes = amps

    @property
    def num_qubits(self) -> int:
        return self.amplitudes.shape[0].bit_length() - 1

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return math.sqrt(float(np.vdot(self.amplitudes, self.amplitudes).real))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self) -> str:
        return f"QuantumState(num_qubits={self.num_qubits})"


class OraclePredicate:
    """Deterministic boolean map over basis indices.

    Either wraps a callable ``func(x) -> bool`` (vectorized over numpy arrays
    is fine) or a precomputed boolean ``mask``. :meth:`mask` materializes the
    predicate on ``[0, size)`` and caches it, padding with ``False`` when the
    stored mask is shorter than the register.
    """

    def __init__(self, func: Optional[Callable] = None, mask=None):
        if func is None and mask is None:
            raise ValueError("need a predicate function or a mask")
        self._func = func
        self._base = None if mask is None else np.asarray(mask, dtype=bool)
        self._cache: dict[int, np.ndarray] = {}

    @classmethod
    def from_indices(cls, indices, size: int) -> "OraclePredicate":
        mask = np.zeros(size, dtype=bool)
        mask[np.asarray(list(indices), dtype=np.int64)] = True
        return cls(mask=mask)

    def __call__(self, x: int) -> bool:
        if self._base is not None:
            return bool(x < self._base.shape[0] and self._base[x])
        return bool(self._func(x))

    def mask(self, size: int) -> np.ndarray:
        cached = self._cache.get(size)
        if cached is not None:
            return cached
        if self._base is not None:
            out = np.zeros(size, dtype=bool)
            n = min(size, self._base.shape[0])
            out[:n] = self._base[:n]
            if self._base[n:].any():
                raise DimensionMismatchError(
                    "oracle accepts indices beyond the register size"
                )
        else:
            xs = np.arange(size)
            try:
                out = np.asarray(self._func(xs), dtype=bool)
                if out.shape != (size,):
                    raise TypeError
            except (TypeError, ValueError):
                out = np.fromiter((bool(self._func(int(x))) for x in xs), bool, size)
        out.flags.writeable = False
        self._cache[size] = out
        return out

    def count(self, size: int) -> int:
        return int(np.count_nonzero(self.mask(size)))


def _as_mask(oracle, size: int) -> np.ndarray:
    if isinstance(oracle, OraclePredicate):
        return oracle.mask(size)
    mask = np.asarray(oracle, dtype=bool)
    if mask.shape != (size,):
        raise DimensionMismatchError(
            f"oracle mask has shape {mask.shape}, register has {size} amplitudes"
        )
    return mask


def uniform_state(num_qubits: int, max_qubits: int = DEFAULT_MAX_QUBITS) -> QuantumState:
    check_qubits(num_qubits, max_qubits)
    dim = 2**num_qubits
    return QuantumState(np.full(dim, 1.0 / math.sqrt(dim), dtype=np.complex128))


def basis_state(index: int, num_qubits: int) -> QuantumState:
    amps = np.zeros(2**num_qubits, dtype=np.complex128)
    amps[index] = 1.0
    return QuantumState(amps)


def apply_grover(
    state: QuantumState,
    oracle,
    t: int,
    ctx: Optional[ExecutionContext] = None,
) -> QuantumState:
    """Apply ``((2|u><u| - I) O)^t`` where ``|u>`` is the uniform state.

    ``O`` flips the sign of every amplitude the oracle accepts. Each round
    costs one oracle call, recorded on ``ctx``.
    """
    if t < 0 or int(t) != t:
        raise ValueError(f"iteration count must be a non-negative integer, got {t}")
    t = int(t)
    mask = _as_mask(oracle, state.dim)
    amps = np.array(state.amplitudes, dtype=np.complex128, copy=True)
    kernels.grover_iterate(amps, mask, t, backend=ctx.backend if ctx else None)
    if ctx is not None:
        ctx.oracle_calls += t
    return QuantumState(amps)


def grover_closed_form(state: QuantumState, oracle, t: int) -> QuantumState:
    """Closed-form result of :func:`apply_grover`, without iterating.

    The good and bad averages rotate rigidly by ``t * omega`` in the plane
    spanned by the flat good and flat bad vectors; deviations from the good
    average are carried along unchanged and deviations from the bad average
    flip sign every round. Real and imaginary parts evolve independently.
    """
    dim = state.dim
    mask = _as_mask(oracle, dim)
    r = int(np.count_nonzero(mask))
    amps = state.amplitudes
    good = amps[mask]
    bad = amps[~mask]
    g_mean = good.mean() if r else 0.0
    b_mean = bad.mean() if r < dim else 0.0
    omega = math.acos(1.0 - 2.0 * r / dim)
    sg, sb = math.sqrt(r), math.sqrt(dim - r)

    def rotate(gm: float, bm: float) -> tuple[float, float]:
        u, v = gm * sg, bm * sb
        rho = math.hypot(u, v)
        phase = math.atan2(u, v) + omega * t
        g_fin = rho * math.sin(phase) / sg if r else 0.0
        b_fin = rho * math.cos(phase) / sb if r < dim else 0.0
        return g_fin, b_fin

    g_re, b_re = rotate(complex(g_mean).real, complex(b_mean).real)
    g_im, b_im = rotate(complex(g_mean).imag, complex(b_mean).imag)
    out = np.empty(dim, dtype=np.complex128)
    out[mask] = complex(g_re, g_im) + (good - g_mean)
    sign = -1.0 if t % 2 else 1.0
    out[~mask] = complex(b_re, b_im) + sign * (bad - b_mean)
    return QuantumState(out, check_norm=False)


def fidelity(a: QuantumState, b: QuantumState) -> float:
    """Modulus of the inner product ``<a|b>``."""
    if a.dim != b.dim:
        raise DimensionMismatchError(
            f"cannot compare states on {a.num_qubits} and {b.num_qubits} qubits"
        )
    return min(1.0, abs(complex(np.vdot(a.amplitudes, b.amplitudes))))


@dataclass
class AuxMeasurement:
    success: bool
    success_probability: float
    collapsed: Optional[QuantumState] = field(default=None, repr=False)


def measure_aux(state: QuantumState, num_aux: int, rng: np.random.Generator) -> AuxMeasurement:
    """Measure the ``num_aux`` most significant qubits in the computational basis.

    Success means every auxiliary qubit reads 0; the returned state is then the
    renormalized restriction to the low ``num_qubits - num_aux`` qubits.
    """
    if not 0 < num_aux < state.num_qubits:
        raise ValueError(
            f"need 0 < a < {state.num_qubits} auxiliary qubits, got {num_aux}"
        )
    n = state.dim >> num_aux
    low = state.amplitudes[:n]
    p_success = float(np.vdot(low, low).real)
    if p_success <= 0.0:
        raise DegenerateStateError("no probability on the aux-all-zero subspace")
    p_success = min(p_success, 1.0)
    success = bool(rng.random() < p_success)
    collapsed = None
    if success:
        collapsed = QuantumState(low / math.sqrt(p_success))
    return AuxMeasurement(success, p_success, collapsed)
