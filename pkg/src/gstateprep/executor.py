"""The two-stage preparation: staged amplification, post-selection, phases."""

from __future__ import annotations

import json
import logging
import math
import secrets
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Optional

import numpy as np

from . import counting as counting_mod
from .errors import GStatePrepError, ScheduleError
from .oracles import OracleBank, build_oracles
from .schedule import Schedule, build_schedule
from .state import (
    DEFAULT_MAX_QUBITS,
    ExecutionContext,
    QuantumState,
    apply_grover,
    check_qubits,
    fidelity,
    measure_aux,
    uniform_state,
)
from .target import AccuracyParams, TargetSpec, derive_params, magnitude_target, target_state

log = logging.getLogger(__name__)

DEFAULT_MAX_RETRIES = 16


@dataclass
class RunOptions:
    overrides: dict = field(default_factory=dict)
    max_retries: int = DEFAULT_MAX_RETRIES
    redraw_counts_on_retry: bool = False
    strict_phases: bool = False
    max_qubits: int = DEFAULT_MAX_QUBITS
    audit: bool = True
    backend: Optional[str] = None


@dataclass
class PrepArtifacts:
    """Simulator-side objects kept for audits; never serialized."""

    spec: TargetSpec
    params: AccuracyParams
    bank: Optional[OracleBank] = None
    counts: Any = None
    schedule: Optional[Schedule] = None
    pre_measurement: Optional[QuantumState] = None
    stage1: Optional[QuantumState] = None
    final: Optional[QuantumState] = None
    phase_realized: Optional[np.ndarray] = None


@dataclass
class RunReport:
    seed: Optional[int] = None
    status: str = "ok"
    errors: list = field(default_factory=list)
    scenario: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    attempts: int = 0
    outcomes: list = field(default_factory=list)
    measured_outcome: Optional[str] = None
    success_probability: Optional[float] = None
    p_fail_exact: Optional[float] = None
    p_fail_formula: Optional[float] = None
    p_fail_formula_corrected: Optional[float] = None
    fidelity_pre_measurement: Optional[float] = None
    fidelity_stage1: Optional[float] = None
    fidelity_total: Optional[float] = None
    oracle_calls_prep: int = 0
    oracle_calls_prep_per_attempt: int = 0
    oracle_calls_counting: int = 0
    phase_ops: int = 0
    B_T_observed: Optional[float] = None
    realized_heights: list = field(default_factory=list)
    counts_in_contract: Optional[bool] = None
    audit: Optional[dict] = None
    artifacts: Optional[PrepArtifacts] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "artifacts"}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


# --------------------------------------------------------------------------
# stage 1
# --------------------------------------------------------------------------

def region_index(bank: OracleBank, schedule: Schedule, size: int) -> np.ndarray:
    """Staircase region of every register index: k for ``O_k minus O_{k-1}``, T+1 elsewhere."""
    f = np.asarray(schedule.f, dtype=np.int64)
    out = np.full(size, schedule.T + 1, dtype=np.int64)
    out[: bank.N] = np.searchsorted(f, bank.first_index, side="left") + 1
    return out


def realized_heights(state: QuantumState, bank: OracleBank, schedule: Schedule) -> tuple[np.ndarray, float, float]:
    """Step heights, background level and max within-level spread read off a state.

    Levels are read as means of the real parts per staircase region; a region
    that is empty (possible under counting errors) is bridged by splitting
    nothing, i.e. its height folds into the next non-empty step.
    """
    amps = state.amplitudes.real
    regions = region_index(bank, schedule, state.dim)
    T = schedule.T
    levels = np.full(T + 1, np.nan)
    spread = 0.0
    for k in range(1, T + 2):
        vals = amps[regions == k]
        if vals.size:
            levels[k - 1] = vals.mean()
            spread = max(spread, float(vals.max() - vals.min()))
    background = float(amps[bank.N :].mean())
    levels[T] = background
    heights = np.full(T, np.nan)
    nxt = background
    for k in range(T, 0, -1):
        if not np.isnan(levels[k - 1]):
            heights[k - 1] = levels[k - 1] - nxt
            nxt = levels[k - 1]
    return heights, background, spread


def stage_heights(state: QuantumState, mask: np.ndarray) -> float:
    """Separation between the good and bad average amplitudes under ``mask``."""
    amps = state.amplitudes.real
    return float(amps[mask].mean() - amps[~mask].mean())


def amplify(schedule: Schedule, bank: OracleBank, ctx: ExecutionContext) -> tuple[QuantumState, np.ndarray]:
    """Run every ``G(O_k, t_k)`` from the uniform state; return state and per-stage heights."""
    L = bank.N.bit_length() - 1 + schedule.a
    check_qubits(L, ctx.max_qubits)
    state = uniform_state(L, ctx.max_qubits)
    heights = np.empty(schedule.T)
    for k, (fk, tk) in enumerate(zip(schedule.f, schedule.t)):
        mask = bank.mask(fk, state.dim)
        before = stage_heights(state, mask)
        state = apply_grover(state, mask, tk, ctx)
        heights[k] = stage_heights(state, mask) - before
    return state, heights


def prepare_magnitude(
    spec: TargetSpec,
    params: AccuracyParams,
    schedule: Schedule,
    bank: OracleBank,
    rng: np.random.Generator,
    ctx: Optional[ExecutionContext] = None,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> tuple[Optional[QuantumState], dict]:
    """Stage 1: amplify, then post-select the auxiliary qubits onto zero.

    The pre-measurement state is deterministic, so it is simulated once and
    re-measured on every retry; oracle calls are still charged per attempt.
    Returns ``(state or None, partial report fields)``.
    """
    if schedule.T < 1:
        raise ScheduleError("stage 1 needs at least one selected oracle")
    ctx = ctx or ExecutionContext()
    psi_T, stage_h = amplify(schedule, bank, ctx)
    per_attempt = schedule.total_calls
    heights, background, spread = realized_heights(psi_T, bank, schedule)
    heights = np.where(np.isnan(heights), stage_h, heights)

    outcomes = []
    collapsed = None
    p_success = None
    for attempt in range(1, max_retries + 1):
        if attempt > 1:
            ctx.oracle_calls += per_attempt
        meas = measure_aux(psi_T, params.a, rng)
        p_success = meas.success_probability
        outcomes.append("success" if meas.success else "fail")
        if meas.success:
            collapsed = meas.collapsed
            break
    M = psi_T.dim
    N = spec.N
    fields = {
        "attempts": len(outcomes),
        "outcomes": outcomes,
        "measured_outcome": outcomes[-1],
        "success_probability": p_success,
        "p_fail_exact": 1.0 - p_success,
        "p_fail_formula": (M - 1) * N * background**2,
        "p_fail_formula_corrected": (M - N) * background**2,
        "oracle_calls_prep_per_attempt": per_attempt,
        "oracle_calls_prep": per_attempt * len(outcomes),
        "B_T_observed": background,
        "realized_heights": [float(h) for h in heights],
        "stage_heights": [float(h) for h in stage_h],
        "level_spread": spread,
        "pre_measurement": psi_T,
    }
    return collapsed, fields


# --------------------------------------------------------------------------
# stage 2
# --------------------------------------------------------------------------

def realized_phases(spec: TargetSpec) -> np.ndarray:
    """``phi~(x) = eps' * #{k : phi(x) > (k - 1/2) eps'}``."""
    eps = float(spec.epsilon_prime)
    K = spec.epsilon_prime.denominator
    thresholds = (np.arange(1, K + 1) - 0.5) * eps
    fired = np.searchsorted(thresholds, spec.phase, side="left")
    return eps * fired


def apply_phases(
    state: QuantumState,
    spec: TargetSpec,
    ctx: Optional[ExecutionContext] = None,
    strict: bool = False,
) -> QuantumState:
    """Apply the conditional phase shifts ``U_1 ... U_K`` (``K = 1/eps'``).

    The default path computes the accumulated phase per x in one pass; the
    strict path applies each ``U_k`` as its own operator.
    """
    if state.dim != spec.N:
        raise ValueError("phase stage acts on the log2(N)-qubit register")
    eps = float(spec.epsilon_prime)
    K = spec.epsilon_prime.denominator
    if strict:
        amps = np.array(state.amplitudes, copy=True)
        shift = np.exp(2j * np.pi * eps)
        for k in range(K, 0, -1):
            fires = spec.phase > (k - 0.5) * eps
            amps[fires] *= shift
    else:
        amps = state.amplitudes * np.exp(2j * np.pi * realized_phases(spec))
    if ctx is not None:
        ctx.phase_ops += K
    return QuantumState(amps)


# --------------------------------------------------------------------------
# full run
# --------------------------------------------------------------------------

def scenario_echo(spec: TargetSpec) -> dict:
    return {
        "name": spec.name,
        "N": spec.N,
        "eta": spec.eta,
        "lambda": spec.lam,
        "nu": spec.nu,
        "epsilon_prime": str(spec.epsilon_prime),
    }


def new_seed() -> int:
    return secrets.randbits(32)


def run_full(spec: TargetSpec, options: Optional[RunOptions] = None, seed: Optional[int] = None) -> RunReport:
    """Both stages end to end, with the bound audit attached.

    Failures inside the stages become report entries (``status="error"``).
    """
    options = options or RunOptions()
    seed = new_seed() if seed is None else int(seed)
    root = np.random.SeedSequence(seed)
    count_seq, measure_seq = root.spawn(2)
    ctx = ExecutionContext(max_qubits=options.max_qubits, backend=options.backend)
    report = RunReport(seed=seed, scenario=scenario_echo(spec))

    params = derive_params(spec, options.overrides)
    report.params = params.to_dict()
    art = PrepArtifacts(spec, params)
    report.artifacts = art
    try:
        art.bank = bank = build_oracles(spec, params)
        count_rng = np.random.default_rng(count_seq)
        measure_rng = np.random.default_rng(measure_seq)
        art.counts = counting_mod.estimate_all(bank, params, count_rng, ctx)
        art.schedule = build_schedule(art.counts.values, params, spec.eta, spec.N)

        retries_left = options.max_retries
        total_attempts = 0
        outcomes = []
        while True:
            state1, fields = prepare_magnitude(
                spec, params, art.schedule, bank, measure_rng, ctx,
                retries_left if not options.redraw_counts_on_retry else 1,
            )
            total_attempts += fields["attempts"]
            outcomes += fields["outcomes"]
            retries_left -= fields["attempts"]
            if state1 is not None or retries_left <= 0 or not options.redraw_counts_on_retry:
                break
            art.counts = counting_mod.estimate_all(bank, params, count_rng, ctx)
            art.schedule = build_schedule(art.counts.values, params, spec.eta, spec.N)

        art.pre_measurement = fields.pop("pre_measurement")
        fields.pop("stage_heights")
        fields.pop("level_spread")
        fields["attempts"] = total_attempts
        fields["outcomes"] = outcomes
        fields["oracle_calls_prep"] = ctx.oracle_calls
        for key, value in fields.items():
            setattr(report, key, value)
        report.counts = art.counts.to_dict()
        report.schedule = art.schedule.to_dict()
        report.oracle_calls_counting = ctx.counting_calls
        report.counts_in_contract = bool(np.all(art.counts.in_contract(params.eta_c, spec.N)))

        psi_p = magnitude_target(spec, options.max_qubits)
        n = spec.N
        low = art.pre_measurement.amplitudes[:n]
        report.fidelity_pre_measurement = float(abs(np.vdot(psi_p.amplitudes, low)))
        if state1 is None:
            report.status = "failed"
            report.errors.append(f"post-selection failed {total_attempts} times")
        else:
            art.stage1 = state1
            report.fidelity_stage1 = fidelity(psi_p, state1)
            art.final = apply_phases(state1, spec, ctx, strict=options.strict_phases)
            art.phase_realized = realized_phases(spec)
            report.fidelity_total = fidelity(target_state(spec, options.max_qubits), art.final)
        report.phase_ops = ctx.phase_ops
    except GStatePrepError as exc:
        report.status = "error"
        report.errors.append(f"{type(exc).__name__}: {exc}")
        report.oracle_calls_counting = ctx.counting_calls
        log.warning("run aborted: %s", exc)
        return report

    if options.audit:
        from .analysis import audit_run

        report.audit = audit_run(report).to_dict()
    return report
