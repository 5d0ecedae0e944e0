"""Problem instances, admissibility checks and accuracy parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np
import yaml
from scipy import stats

from .errors import ParameterError, ScenarioError
from .state import DEFAULT_MAX_QUBITS, QuantumState, check_qubits

PROB_SUM_TOL = 1e-9
MAX_INV_EPSILON = 10**6
COUNTING_MODES = ("sampled", "exact")

SCENARIO_KEYS = {
    "name", "N", "family", "table", "family_params", "renormalize",
    "phi_family", "phi_table", "phi_params",
    "eta", "lambda", "nu", "epsilon_prime", "overrides", "seed",
}
OVERRIDE_KEYS = {"epsilon", "eta_c", "eta_g", "a", "counting_mode"}


def as_fraction(value) -> Fraction:
    """Exact rational from an int, a decimal/ratio string or a float literal."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # repr gives the shortest decimal that round-trips, i.e. what the user typed
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational number")


def _ceil_log2(x: Fraction) -> int:
    """Smallest integer k with 2**k >= x, computed exactly."""
    if x <= 0:
        raise ValueError("log2 of a non-positive number")
    k = math.frexp(float(x))[1]  # first guess
    while Fraction(2) ** k < x:
        k += 1
    while Fraction(2) ** (k - 1) >= x:
        k -= 1
    return k


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """Target ``sum_x sqrt(p(x)) exp(2 pi i phi(x)) |x>`` plus accuracy slacks.

    ``prob`` and ``phase`` are materialized arrays of length ``N``.
    """

    N: int
    prob: np.ndarray = field(repr=False)
    phase: np.ndarray = field(repr=False)
    eta: float
    lam: float
    nu: float
    epsilon_prime: Fraction
    name: str = "unnamed"

    def __post_init__(self):
        prob = np.asarray(self.prob, dtype=np.float64)
        phase = np.asarray(self.phase, dtype=np.float64)
        prob.flags.writeable = False
        phase.flags.writeable = False
        object.__setattr__(self, "prob", prob)
        object.__setattr__(self, "phase", phase)
        object.__setattr__(self, "epsilon_prime", as_fraction(self.epsilon_prime))
        self.validate()

    def validate(self) -> None:
        N = self.N
        if not _is_power_of_two(N):
            raise ScenarioError(f"N={N} is not a power of two")
        if self.prob.shape != (N,) or self.phase.shape != (N,):
            raise ScenarioError("p and phi must both have exactly N entries")
        if not 0.0 < self.eta <= 1.0:
            raise ScenarioError(f"eta={self.eta} must lie in (0, 1]")
        for label, v in (("lambda", self.lam), ("nu", self.nu)):
            if not 0.0 < v < 1.0:
                raise ScenarioError(f"{label}={v} must lie in (0, 1)")
        if self.epsilon_prime <= 0 or self.epsilon_prime.numerator != 1:
            raise ScenarioError(
                f"epsilon_prime={self.epsilon_prime} must be 1/k for a positive integer k"
            )
        if np.any(self.prob < 0) or not np.all(np.isfinite(self.prob)):
            bad = int(np.flatnonzero((self.prob < 0) | ~np.isfinite(self.prob))[0])
            raise ScenarioError(f"p({bad}) = {self.prob[bad]!r} is not a probability")
        total = math.fsum(self.prob)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ScenarioError(f"probabilities sum to {total!r}, not 1")
        cap = 1.0 / (self.eta * N)
        over = np.flatnonzero(self.prob > cap * (1 + 1e-12))
        if over.size:
            x = int(over[np.argmax(self.prob[over])])
            raise ScenarioError(
                f"amplitude bound violated at x={x}: p(x)={self.prob[x]:.6g} "
                f"> 1/(eta*N) = {cap:.6g}"
            )
        if np.any((self.phase < 0) | (self.phase >= 1)):
            x = int(np.flatnonzero((self.phase < 0) | (self.phase >= 1))[0])
            raise ScenarioError(f"phi({x}) = {self.phase[x]!r} is outside [0, 1)")

    @property
    def num_qubits(self) -> int:
        return self.N.bit_length() - 1

    @property
    def lambda_prime(self) -> float:
        return float(self.epsilon_prime) ** 2 / 8

    def p(self, x: int) -> float:
        return float(self.prob[x])

    def phi(self, x: int) -> float:
        return float(self.phase[x])


@dataclass(frozen=True)
class AccuracyParams:
    """Derived accuracy knobs of the preparation and counting stages."""

    epsilon: Fraction
    eta_c: Fraction
    eta_g: Fraction
    a: int
    m: int
    a_c: int
    counting_mode: str = "sampled"
    worst_case: bool = True
    epsilon_from_lambda: bool = True

    @property
    def inv_epsilon(self) -> int:
        return self.epsilon.denominator

    @property
    def mu(self) -> float:
        """Bound on the fraction of x where the two staircase approximations differ."""
        return float(4 * self.eta_c / self.epsilon + self.eta_g + self.eta_c)

    def to_dict(self) -> dict:
        return {
            "epsilon": str(self.epsilon),
            "eta_c": str(self.eta_c),
            "eta_g": str(self.eta_g),
            "a": self.a,
            "m": self.m,
            "a_c": self.a_c,
            "counting_mode": self.counting_mode,
            "worst_case": self.worst_case,
            "epsilon_from_lambda": self.epsilon_from_lambda,
        }


def choose_epsilon(lam, eta, limit: int = MAX_INV_EPSILON) -> Fraction:
    """Largest ``1/k`` strictly below ``lam * eta / 3``."""
    bound = as_fraction(lam) * as_fraction(eta) / 3
    if bound <= 0:
        raise ParameterError("lambda * eta must be positive")
    k = math.floor(1 / bound) + 1
    if k > limit:
        raise ParameterError(
            f"lambda*eta/3 = {float(bound):.3g} needs 1/epsilon = {k} > limit {limit}"
        )
    eps = Fraction(1, k)
    assert eps < bound and (k == 1 or Fraction(1, k - 1) >= bound)
    return eps


def worst_case_params(epsilon, nu, counting_mode: str = "sampled") -> AccuracyParams:
    """Accuracy parameters that carry the unconditional fidelity guarantee."""
    eps = as_fraction(epsilon)
    if eps <= 0 or eps.numerator != 1 or eps.denominator < 2:
        raise ParameterError(f"epsilon={eps} must be 1/k with integer k >= 2")
    if counting_mode not in COUNTING_MODES:
        raise ParameterError(f"counting_mode must be one of {COUNTING_MODES}")
    nu = as_fraction(nu)
    eta_c = eps**5 / 54
    eta_g = Fraction(99, 100) * eps**2
    ratio = eta_g / eta_c
    a = _ceil_log2(ratio) - 3
    m = _ceil_log2(1 / eta_c)
    a_c = m + _ceil_log2(2 + 1 / (2 * nu))
    params = AccuracyParams(eps, eta_c, eta_g, a, m, a_c, counting_mode)

    # Consequences the error analysis relies on. The upper bound on 2^a is the
    # one the ceiling actually delivers (2^a < 2 * ratio / 8), see README.
    assert a >= 3, a
    assert 2**a > 6 / eps**2, (a, eps)
    assert 2**a < 2 * ratio / 8, (a, eps)
    assert eta_c / eta_g < Fraction(1, 10)
    assert eta_c < eta_g < Fraction(1, 2)
    return params


def derive_params(spec: TargetSpec, overrides: Optional[Mapping[str, Any]] = None) -> AccuracyParams:
    """Worst-case parameters for ``spec`` with optional user overrides.

    Overriding only ``epsilon`` keeps the worst-case relations between
    epsilon, eta_c, eta_g and a (the guarantee audits stay applicable).
    Overriding any of ``eta_c``, ``eta_g`` or ``a`` drops the worst-case flag.
    """
    overrides = dict(overrides or {})
    unknown = set(overrides) - OVERRIDE_KEYS
    if unknown:
        raise ScenarioError(f"unknown override keys: {sorted(unknown)}")
    mode = overrides.get("counting_mode", "sampled")
    if "epsilon" in overrides and overrides["epsilon"] is not None:
        eps = as_fraction(overrides["epsilon"])
        from_lambda = eps < as_fraction(spec.lam) * as_fraction(spec.eta) / 3
    else:
        eps = choose_epsilon(spec.lam, spec.eta)
        from_lambda = True
    params = worst_case_params(eps, spec.nu, mode)
    params = replace(params, epsilon_from_lambda=from_lambda)
    loose = {k: overrides[k] for k in ("eta_c", "eta_g", "a") if overrides.get(k) is not None}
    if loose:
        eta_c = as_fraction(loose.get("eta_c", params.eta_c))
        eta_g = as_fraction(loose.get("eta_g", params.eta_g))
        a = int(loose.get("a", params.a))
        if not 0 < eta_c < eta_g < Fraction(1, 2):
            raise ParameterError("need 0 < eta_c < eta_g < 1/2")
        if a < 1:
            raise ParameterError("need at least one auxiliary qubit")
        m = _ceil_log2(1 / eta_c)
        a_c = m + _ceil_log2(2 + 1 / (2 * as_fraction(spec.nu)))
        params = replace(params, eta_c=eta_c, eta_g=eta_g, a=a, m=m, a_c=a_c, worst_case=False)
    return params


# --------------------------------------------------------------------------
# target states
# --------------------------------------------------------------------------

def target_state(spec: TargetSpec, max_qubits: int = DEFAULT_MAX_QUBITS) -> QuantumState:
    check_qubits(max(spec.num_qubits, 1), max_qubits)
    amps = np.sqrt(spec.prob) * np.exp(2j * np.pi * spec.phase)
    return QuantumState(amps)


def magnitude_target(spec: TargetSpec, max_qubits: int = DEFAULT_MAX_QUBITS) -> QuantumState:
    check_qubits(max(spec.num_qubits, 1), max_qubits)
    return QuantumState(np.sqrt(spec.prob).astype(np.complex128))


# --------------------------------------------------------------------------
# scenario families
# --------------------------------------------------------------------------

def _family_uniform(N, **_):
    return np.full(N, 1.0 / N)


def _family_truncated_gaussian(N, mean=None, sigma=None, **_):
    mean = (N - 1) / 2 if mean is None else float(mean)
    sigma = N / 8 if sigma is None else float(sigma)
    if sigma <= 0:
        raise ScenarioError("truncated_gaussian needs sigma > 0")
    x = np.arange(N)
    w = np.exp(-0.5 * ((x - mean) / sigma) ** 2)
    return w / w.sum()


def _family_binomial(N, q=0.5, **_):
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ScenarioError("binomial needs 0 < q < 1")
    p = stats.binom.pmf(np.arange(N), N - 1, q)
    return p / p.sum()


def _family_two_level(N, fraction=0.5, ratio=2.0, **_):
    fraction, ratio = float(fraction), float(ratio)
    n_high = int(round(fraction * N))
    if not 0 < n_high <= N or ratio <= 0:
        raise ScenarioError("two_level needs 0 < fraction*N <= N and ratio > 0")
    w = np.ones(N)
    w[:n_high] = ratio
    return w / w.sum()


def _family_delta(N, y=0, **_):
    y = int(y)
    if not 0 <= y < N:
        raise ScenarioError(f"delta position y={y} outside [0, {N})")
    p = np.zeros(N)
    p[y] = 1.0
    return p


P_FAMILIES = {
    "uniform": _family_uniform,
    "truncated_gaussian": _family_truncated_gaussian,
    "binomial": _family_binomial,
    "two_level": _family_two_level,
    "delta": _family_delta,
}


def _phi_zero(N, **_):
    return np.zeros(N)


def _phi_constant(N, value=0.0, **_):
    return np.full(N, float(value) % 1.0)


def _phi_linear(N, slope=1.0, offset=0.0, **_):
    return (float(offset) + float(slope) * np.arange(N) / N) % 1.0


def _phi_quadratic(N, scale=1.0, **_):
    x = np.arange(N) / N
    return (float(scale) * x * x) % 1.0


PHI_FAMILIES = {
    "zero": _phi_zero,
    "constant": _phi_constant,
    "linear": _phi_linear,
    "quadratic": _phi_quadratic,
}


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def spec_from_mapping(data: Mapping[str, Any]) -> TargetSpec:
    """Build a validated :class:`TargetSpec` from a parsed scenario tree."""
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario must be a mapping at top level")
    unknown = set(data) - SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    overrides = data.get("overrides") or {}
    if not isinstance(overrides, Mapping):
        raise ScenarioError("overrides must be a mapping")
    bad = set(overrides) - OVERRIDE_KEYS
    if bad:
        raise ScenarioError(f"unknown override keys: {sorted(bad)}")

    has_family, has_table = "family" in data, "table" in data
    if has_family == has_table:
        raise ScenarioError("give exactly one of 'family' or 'table'")
    if "phi_family" in data and "phi_table" in data:
        raise ScenarioError("give at most one of 'phi_family' or 'phi_table'")

    try:
        if has_table:
            table = np.asarray(data["table"], dtype=np.float64).ravel()
            if table.size == 0:
                raise ScenarioError("empty probability table")
            N = int(data.get("N", _next_pow2(table.size)))
            if not _is_power_of_two(N) or N < table.size:
                raise ScenarioError(
                    f"N={N} must be a power of two >= table length {table.size}"
                )
            prob = np.zeros(N)
            prob[: table.size] = table
            if data.get("renormalize", False):
                s = prob.sum()
                if s <= 0:
                    raise ScenarioError("cannot renormalize an all-zero table")
                prob = prob / s
        else:
            if "N" not in data:
                raise ScenarioError("family scenarios need N")
            N = int(data["N"])
            if not _is_power_of_two(N):
                raise ScenarioError(f"N={N} is not a power of two")
            fam = data["family"]
            if fam not in P_FAMILIES:
                raise ScenarioError(f"unknown family {fam!r}; known: {sorted(P_FAMILIES)}")
            prob = P_FAMILIES[fam](N, **(data.get("family_params") or {}))

        if "phi_table" in data:
            ptab = np.asarray(data["phi_table"], dtype=np.float64).ravel()
            if ptab.size > N:
                raise ScenarioError("phi_table longer than N")
            phase = np.zeros(N)
            phase[: ptab.size] = ptab
        else:
            pfam = data.get("phi_family", "zero")
            if pfam not in PHI_FAMILIES:
                raise ScenarioError(f"unknown phi_family {pfam!r}; known: {sorted(PHI_FAMILIES)}")
            phase = PHI_FAMILIES[pfam](N, **(data.get("phi_params") or {}))

        eta = data.get("eta", "auto")
        if eta == "auto":
            eta = min(1.0, 1.0 / (N * float(prob.max())))
        for key in ("lambda", "nu", "epsilon_prime"):
            if key not in data:
                raise ScenarioError(f"missing required key {key!r}")
        return TargetSpec(
            N=N,
            prob=prob,
            phase=phase,
            eta=float(eta),
            lam=float(data["lambda"]),
            nu=float(data["nu"]),
            epsilon_prime=as_fraction(data["epsilon_prime"]),
            name=str(data.get("name", "unnamed")),
        )
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"invalid scenario value: {exc}") from exc


@dataclass(frozen=True)
class Scenario:
    """A parsed scenario file: the validated spec plus run-level settings."""

    spec: TargetSpec
    overrides: dict
    seed: Optional[int]
    raw: dict = field(repr=False)


def parse_scenario(data: Mapping[str, Any]) -> Scenario:
    spec = spec_from_mapping(data)
    seed = data.get("seed")
    return Scenario(spec, dict(data.get("overrides") or {}), None if seed is None else int(seed), dict(data))


def read_scenario(path) -> Scenario:
    """Parse a YAML scenario file into a :class:`Scenario`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse scenario {path}: {exc}") from exc
    return parse_scenario(data)


def load_scenario(path) -> TargetSpec:
    """Parse and validate a scenario file, returning only the target spec."""
    return read_scenario(path).spec
