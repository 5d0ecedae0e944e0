import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_spec
from gstateprep.errors import ParameterError, ScenarioError
from gstateprep.state import fidelity
from gstateprep.target import (
    TargetSpec,
    choose_epsilon,
    derive_params,
    load_scenario,
    magnitude_target,
    parse_scenario,
    read_scenario,
    target_state,
    worst_case_params,
)


def test_uniform_family_valid_for_any_eta():
    for eta in (0.1, 0.5, 1.0):
        spec = make_spec(N=8, family="uniform", eta=eta)
        np.testing.assert_allclose(spec.prob, 1 / 8)


def test_delta_family_rejected_with_violating_x():
    with pytest.raises(ScenarioError, match="x=3"):
        make_spec(N=8, family="delta", family_params={"y": 3}, eta=0.5)


def test_boundary_equality_accepted():
    spec = make_spec(table=[0.5, 0.5, 0, 0], eta=0.5)
    assert spec.N == 4


def test_target_state_examples():
    np.testing.assert_allclose(target_state(make_spec(N=4, family="uniform", eta=1)).amplitudes, [0.5] * 4)
    np.testing.assert_allclose(target_state(make_spec(table=[1, 0, 0, 0], eta=0.25)).amplitudes, [1, 0, 0, 0])
    spec = make_spec(N=2, family="uniform", eta=1, phi_table=[0, 0.5])
    np.testing.assert_allclose(target_state(spec).amplitudes, [1 / math.sqrt(2), -1 / math.sqrt(2)], atol=1e-15)


def test_magnitude_target():
    spec = make_spec(table=[0.5, 0.5, 0, 0], eta=0.5, phi_table=[0.1, 0.7])
    np.testing.assert_allclose(magnitude_target(spec).amplitudes, [1 / math.sqrt(2)] * 2 + [0, 0])
    expected = abs(np.sum(spec.prob * np.exp(2j * np.pi * spec.phase)))
    assert fidelity(magnitude_target(spec), target_state(spec)) == pytest.approx(expected)
    zero = make_spec(N=8, family="binomial", eta="auto")
    np.testing.assert_array_equal(magnitude_target(zero).amplitudes, target_state(zero).amplitudes)


@pytest.mark.parametrize("lam,eta,expected", [(0.9, 1, Fraction(1, 4)), (0.3, 1, Fraction(1, 11)), (1.5, 1, Fraction(1, 3))])
def test_choose_epsilon_examples(lam, eta, expected):
    assert choose_epsilon(lam, eta) == expected


@given(lam=st.floats(0.01, 0.999), eta=st.floats(0.01, 1.0))
def test_choose_epsilon_is_largest_reciprocal_below_bound(lam, eta):
    bound = Fraction(repr(lam)) * Fraction(repr(eta)) / 3
    eps = choose_epsilon(lam, eta)
    assert eps < bound
    assert Fraction(1, eps.denominator - 1) >= bound


def test_choose_epsilon_limit():
    with pytest.raises(ParameterError):
        choose_epsilon(1e-9, 1e-3)


def test_worst_case_quarter():
    p = worst_case_params(Fraction(1, 4), 0.1)
    assert p.eta_c == Fraction(1, 55296)
    assert float(p.eta_c) == pytest.approx(1.8084e-5, rel=1e-4)
    assert float(p.eta_g) == pytest.approx(0.061875)
    assert (p.a, p.m, p.a_c) == (9, 16, 19)
    assert p.mu == pytest.approx(0.06218, abs=1e-5)
    assert p.mu < 1 / 16


def test_worst_case_half():
    p = worst_case_params("1/2", 0.1)
    assert p.eta_c == Fraction(1, 1728)
    assert float(p.eta_g) == pytest.approx(0.2475)
    assert p.a == 6


@given(k=st.integers(2, 200), nu=st.sampled_from([0.01, 0.05, 0.1, 0.25]))
def test_worst_case_relations(k, nu):
    p = worst_case_params(Fraction(1, k), nu)
    eps = Fraction(1, k)
    assert p.eta_c / p.eta_g < Fraction(1, 10)
    assert 2**p.a > 6 / eps**2
    assert p.a_c > p.m


def test_worst_case_rejects_bad_epsilon():
    for bad in ("2/5", "1", "0"):
        with pytest.raises(ParameterError):
            worst_case_params(bad, 0.1)
    with pytest.raises(ParameterError):
        worst_case_params("1/4", 0.1, counting_mode="magic")


def test_derive_params_overrides():
    spec = make_spec(N=8, family="uniform", eta=1.0)
    assert derive_params(spec).epsilon == Fraction(1, 4)
    p = derive_params(spec, {"epsilon": "1/8"})
    assert p.worst_case and p.epsilon_from_lambda and p.a == worst_case_params("1/8", 0.1).a
    loose = derive_params(spec, {"eta_c": "1/100", "a": 3})
    assert not loose.worst_case and loose.a == 3
    with pytest.raises(ScenarioError):
        derive_params(spec, {"bogus": 1})
    with pytest.raises(ParameterError):
        derive_params(spec, {"eta_c": "0.3", "eta_g": "0.2"})


def test_validation_errors():
    with pytest.raises(ScenarioError, match="sum"):
        make_spec(table=[0.5, 0.4], eta=1)
    with pytest.raises(ScenarioError, match="phi"):
        make_spec(N=4, family="uniform", eta=1, phi_table=[1.0])
    with pytest.raises(ScenarioError, match="power of two"):
        make_spec(N=6, family="uniform", eta=1)
    with pytest.raises(ScenarioError, match="1/k"):
        make_spec(N=4, family="uniform", eta=1, epsilon_prime="2/7")
    with pytest.raises(ScenarioError, match="unknown scenario keys"):
        make_spec(N=4, family="uniform", eta=1, colour="red")
    with pytest.raises(ScenarioError, match="exactly one"):
        make_spec(eta=1)


def test_families_normalized_and_auto_eta():
    for fam, params in [("uniform", {}), ("binomial", {"q": 0.3}), ("two_level", {"fraction": 0.25, "ratio": 3}),
                        ("truncated_gaussian", {"mean": 10, "sigma": 4})]:
        spec = make_spec(N=32, family=fam, family_params=params, eta="auto")
        assert math.fsum(spec.prob) == pytest.approx(1.0, abs=1e-12)
        assert spec.eta == pytest.approx(min(1, 1 / (32 * spec.prob.max())))


def test_table_padding_and_renormalize():
    spec = make_spec(table=[1, 1, 1], renormalize=True, eta="auto")
    assert spec.N == 4 and spec.prob[3] == 0


def test_scenario_files_roundtrip(tmp_path):
    path = tmp_path / "s.scn"
    path.write_text("name: s\nN: 8\nfamily: uniform\neta: 1.0\nlambda: 0.8\nnu: 0.1\n"
                    "epsilon_prime: 1/10\nseed: 11\noverrides: {counting_mode: exact}\n")
    scn = read_scenario(path)
    assert scn.seed == 11 and scn.overrides == {"counting_mode": "exact"}
    assert isinstance(load_scenario(path), TargetSpec)
    with pytest.raises(ScenarioError):
        parse_scenario({"N": 8, "family": "uniform", "lambda": 0.8, "nu": 0.1,
                        "epsilon_prime": "1/10", "overrides": {"zzz": 1}})
    with pytest.raises(ScenarioError):
        read_scenario(tmp_path / "missing.scn")
