import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_spec
from gstateprep.counting import estimate_all
from gstateprep.oracles import (
    build_oracles,
    exceptions,
    p_double_prime,
    p_double_prime_amplitudes,
    p_prime,
    p_prime_amplitudes,
)
from gstateprep.schedule import build_schedule
from gstateprep.target import derive_params

FAMILIES = [
    ("uniform", {}),
    ("binomial", {"q": 0.5}),
    ("two_level", {"fraction": 0.25, "ratio": 2.0}),
    ("truncated_gaussian", {"mean": 20.0, "sigma": 9.0}),
]


def setup(spec, **over):
    params = derive_params(spec, {"counting_mode": "exact", **over})
    bank = build_oracles(spec, params)
    counts = estimate_all(bank, params, None)
    return params, bank, build_schedule(counts.values, params, spec.eta, spec.N)


def test_uniform_all_accept_at_k1():
    spec = make_spec(N=4, family="uniform", eta=1.0)
    params = derive_params(spec, {"epsilon": "1/4"})
    bank = build_oracles(spec, params)
    assert all(bank.accepts(k, x) for k in range(1, 5) for x in range(4))
    assert [bank.n(k) for k in range(1, 5)] == [4, 4, 4, 4]
    assert p_prime(spec, bank, 0) == pytest.approx(0.375)


def test_outside_domain_rejected():
    spec = make_spec(N=4, family="uniform", eta=1.0)
    bank = build_oracles(spec, derive_params(spec))
    assert not bank.accepts(bank.K, 4)
    assert not bank.mask(1, 16)[4:].any()


def test_boundary_equality_and_zero_threshold():
    spec = make_spec(table=[0.5, 0.5, 0, 0], eta=0.5)
    params = derive_params(spec, {"epsilon": "1/4"})
    bank = build_oracles(spec, params)
    for k in range(1, 5):
        assert bank.accepts(k, 0) and bank.accepts(k, 1)
        assert bank.accepts(k, 2) == (k == 4)
    np.testing.assert_allclose(p_prime_amplitudes(bank), [0.75 / math.sqrt(2)] * 2 + [0, 0])


@pytest.mark.parametrize("fam,fp", FAMILIES)
@pytest.mark.parametrize("k", [3, 4, 7, 11])
def test_p_prime_within_one_step(fam, fp, k):
    spec = make_spec(N=64, family=fam, family_params=fp, eta="auto")
    bank = build_oracles(spec, derive_params(spec, {"epsilon": Fraction(1, k)}))
    err = p_prime_amplitudes(bank) - np.sqrt(spec.prob)
    assert np.all(err <= 1e-15)
    assert np.all(-err <= bank.step * (1 + 1e-12))


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 12))
def test_counts_monotone_and_match_masks(seed, k):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(16))
    spec = make_spec(table=p.tolist(), eta=min(1.0, 1 / (16 * p.max())))
    bank = build_oracles(spec, derive_params(spec, {"epsilon": Fraction(1, k)}))
    counts = [bank.n(j) for j in range(1, k + 1)]
    assert counts == sorted(counts) and counts[-1] == 16
    assert counts == [int(bank.mask(j).sum()) for j in range(1, k + 1)]


def test_p_double_prime_single_step():
    spec = make_spec(N=16, family="uniform", eta=1.0)
    params, bank, sched = setup(spec)
    assert sched.T == 1
    np.testing.assert_allclose(p_double_prime_amplitudes(sched, bank), sched.delta[0])
    assert sched.delta[0] == pytest.approx(sched.B(1, 1))


@pytest.mark.parametrize("fam,fp", FAMILIES)
def test_p_double_prime_telescopes(fam, fp):
    spec = make_spec(N=64, family=fam, family_params=fp, eta="auto")
    params, bank, sched = setup(spec, epsilon="1/7")
    unit = float(params.epsilon) / math.sqrt(spec.eta * spec.N)
    for k in range(1, sched.T + 1):
        assert sched.B(k, sched.T) == pytest.approx((sched.K - sched.f[k - 1]) * unit)
    # nested acceptance: p'' never increases as the first accepting oracle grows
    pp = p_double_prime_amplitudes(sched, bank)
    order = np.argsort(bank.first_index, kind="stable")
    assert np.all(np.diff(pp[order]) <= 1e-15)
    assert p_double_prime(sched, bank, 0) == pytest.approx(pp[0])


@pytest.mark.parametrize("fam,fp", FAMILIES)
def test_exceptions_exact_mode(fam, fp):
    spec = make_spec(N=64, family=fam, family_params=fp, eta="auto")
    params, bank, sched = setup(spec, epsilon="1/4")
    rep = exceptions(bank, sched, params)
    assert rep.size <= float(params.eta_g + params.eta_c) * spec.N
    assert rep.holds


def test_exceptions_only_below_first_pick():
    # steps below eta_g N are skipped by selection; those points are the exceptions
    table = [0.0] * 64
    table[0] = 0.03
    rest = (1 - 0.03) / 63
    table[1:] = [rest] * 63
    spec = make_spec(table=table, eta="auto")
    params, bank, sched = setup(spec, epsilon="1/4")
    ex = exceptions(bank, sched, params)
    assert bank.n(1) == 1 and sched.f == (2,)
    assert ex.exception_set.tolist() == [0]
    assert ex.size <= ex.bound
