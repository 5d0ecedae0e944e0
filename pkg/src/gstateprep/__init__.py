"""State-vector simulation of staged Grover state preparation with bound auditing."""

from .analysis import BoundAudit, audit_run, resource_table, sorted_profile, sweep, verify_trig_inequalities
from .counting import CountEstimates, counting_distribution, estimate_all, estimate_count
from .errors import (
    AuditFailure,
    DegenerateStateError,
    DimensionMismatchError,
    GStatePrepError,
    InfeasibleProfileError,
    ParameterError,
    ResourceLimitError,
    ScenarioError,
    ScheduleError,
)
from .executor import RunOptions, RunReport, apply_phases, prepare_magnitude, run_full
from .oracles import OracleBank, build_oracles, exceptions, p_double_prime, p_prime
from .schedule import Schedule, build_schedule, grover_times, predict_profile, select_oracles, step_targets
from .state import (
    ExecutionContext,
    OraclePredicate,
    QuantumState,
    apply_grover,
    basis_state,
    grover_closed_form,
    fidelity,
    measure_aux,
    uniform_state,
)
from .target import (
    AccuracyParams,
    Scenario,
    TargetSpec,
    choose_epsilon,
    derive_params,
    load_scenario,
    magnitude_target,
    read_scenario,
    spec_from_mapping,
    target_state,
    worst_case_params,
)

__version__ = "0.1.0"
