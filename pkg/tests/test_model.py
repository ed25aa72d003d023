import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_persuasion import (
    DimensionMismatch,
    InvalidInstance,
    InvalidScheme,
    MissingResponse,
    PersuasionInstance,
    ReceiverStrategy,
    SignalingScheme,
    SubsetActionTuple,
    best_response,
    br_delta_set,
    evaluate_signals,
    expected_utility,
    posterior,
    random_instance,
    robust_utility,
    strategy_utility,
    validate_instance,
    validate_scheme,
)
from robust_persuasion.model import posteriors


def full_revelation(m):
    return SignalingScheme([f"s{i}" for i in range(m)], np.eye(m))


def uninformative(m):
    return SignalingScheme(["s"], np.ones((m, 1)))


# -- validation ---------------------------------------------------------------

def test_apples_valid(apples):
    assert validate_instance(apples) is apples
    assert np.allclose(apples.prior, [1 / 3, 2 / 3])


@pytest.mark.parametrize(
    "kw, code",
    [
        (dict(prior=[0.5, 0.6]), "UnnormalizedPrior"),
        (dict(prior=[1.2, -0.2]), "NegativeProbability"),
        (dict(delta=0.0), "NonpositiveDelta"),
        (dict(delta=-1.0), "NonpositiveDelta"),
        (dict(sender_utility=[[1.5, 0], [0, 0]]), "UtilityOutOfRange"),
        (dict(receiver_utility=[[1, 0, 0], [0, 0, 0]]), "DimensionMismatch"),
        (dict(prior=[1.0]), "DimensionMismatch"),
    ],
)
def test_validation_errors(kw, code):
    base = dict(states=["g", "b"], actions=["x", "y"], prior=[0.5, 0.5],
                sender_utility=[[1, 0], [1, 0]], receiver_utility=[[1, 0.5], [0, 0.5]], delta=0.1)
    base.update(kw)
    with pytest.raises(InvalidInstance) as err:
        validate_instance(PersuasionInstance(**base))
    assert code in err.value.codes


def test_validation_reports_every_violation():
    inst = PersuasionInstance(["a", "b"], ["x"], [0.7, 0.7], [[2.0], [0.0]], [[0.0], [0.0]], 0.0)
    with pytest.raises(InvalidInstance) as err:
        validate_instance(inst)
    assert {"UnnormalizedPrior", "UtilityOutOfRange", "NonpositiveDelta"} <= err.value.codes


def test_instance_is_immutable(apples):
    with pytest.raises(ValueError):
        apples.prior[0] = 0.5
    with pytest.raises(AttributeError):
        apples.delta = 0.3


def test_scheme_invariants():
    with pytest.raises(InvalidScheme):
        validate_scheme(SignalingScheme(["a", "b"], [[0.5, 0.6], [1, 0]]))
    with pytest.raises(InvalidScheme):
        validate_scheme(SignalingScheme(["a", "b"], [[1.5, -0.5], [1, 0]]))
    with pytest.raises(InvalidScheme):
        SignalingScheme(["a", "a"], [[0.5, 0.5]])
    with pytest.raises(DimensionMismatch):
        SignalingScheme(["a"], [[0.5, 0.5]])
    with pytest.raises(DimensionMismatch):
        validate_scheme(SignalingScheme(["a"], [[1.0]]), m=2)


def test_subset_action_tuple():
    t = SubsetActionTuple({0, 2}, 2)
    assert t.mask == 0b101 and t.key == (5, 2)
    assert SubsetActionTuple.from_mask(5, 2) == t
    assert t.label(["x", "y", "z"]) == "{x,z}->z"
    with pytest.raises(ValueError):
        SubsetActionTuple({0}, 1)
    with pytest.raises(ValueError):
        SubsetActionTuple(set(), 0)


# -- posteriors and utilities -------------------------------------------------

def test_posterior_apples_split(apples):
    scheme = SignalingScheme(["PG", "NG"], [[1.0, 0.0], [0.499, 0.501]])
    p = posterior(apples, scheme, 0)
    assert p.marginal == pytest.approx(1 / 3 + 2 / 3 * 0.499)
    assert p.distribution[0] == pytest.approx((1 / 3) / 0.666, rel=1e-12)
    assert p.distribution[0] == pytest.approx(0.50050, abs=1e-5)


def test_posterior_zero_marginal(example32):
    scheme = SignalingScheme(["a", "b"], [[1, 0], [1, 0], [1, 0]])
    p = posterior(example32, scheme, 1)
    assert not p.defined and p.marginal == 0.0
    assert len(evaluate_signals(example32, scheme)) == 1


def test_posterior_dimension_mismatch(example32):
    with pytest.raises(DimensionMismatch):
        posterior(example32, full_revelation(2), 0)


def test_full_revelation_posteriors_are_degenerate(example32):
    marg, mus = posteriors(example32, full_revelation(3))
    assert np.allclose(mus, np.eye(3))
    assert np.allclose(marg, example32.prior)


def test_uninformative_posterior_is_prior(apples):
    p = posterior(apples, uninformative(2), 0)
    assert p.marginal == pytest.approx(1.0)
    assert np.allclose(p.distribution, apples.prior)


def test_expected_utility(example32, apples):
    assert expected_utility(example32.receiver_utility, [0, 0.5, 0.5], 0) == 0.5
    assert expected_utility(example32.sender_utility, [0, 1, 0], 0) == 1.0
    assert expected_utility(apples.receiver_utility, apples.prior, 0) == pytest.approx(1 / 3)


def test_best_response(example32):
    assert best_response(example32, [0, 1, 0]) == 0
    assert best_response(example32, [0, 0, 1]) == 1
    assert best_response(example32, [1, 0, 0]) == 0  # tie, lowest index


def test_br_delta_set_examples(example32):
    assert br_delta_set(example32, [1, 0, 0]) == {0, 1}
    assert br_delta_set(example32, [0, 1, 0]) == {0}
    assert br_delta_set(example32, [0, 1, 0], exact=True) == {0}
    assert br_delta_set(example32.with_delta(2.5), [0.2, 0.3, 0.5]) == {0, 1}


def test_br_boundary_is_excluded(apples):
    # gap exactly delta: buy at posterior 0.6 beats pass by 0.1
    mu = [0.6, 0.4]
    assert br_delta_set(apples, mu) == {0}
    assert br_delta_set(apples, mu, exact=True) == {0}
    # the widening knob pulls it back in
    assert br_delta_set(apples, mu, tie_tolerance=1e-6) == {0, 1}


# -- robust utility -----------------------------------------------------------

def test_robust_full_revelation_example32(example32):
    rv = robust_utility(example32, full_revelation(3))
    assert rv.value == pytest.approx(0.99, abs=1e-12)
    assert robust_utility(example32, full_revelation(3), exact=True).value == Fraction(99, 100)


def test_robust_uninformative_example32(example32):
    # the prior is mixed, so both actions stay in the BR set and the sender
    # gets min(mu(w0), mu(w1))
    rv = robust_utility(example32, uninformative(3))
    assert rv.value == pytest.approx(min(example32.prior[1], example32.prior[2]), abs=1e-12)
    assert rv.value == pytest.approx(0.495, abs=1e-12)


def test_robust_uninformative_apples(apples):
    rv = robust_utility(apples, uninformative(2))
    assert rv.value == 0.0 and rv.worst_actions == {"s": 1}


def test_robust_single_action(single_action):
    expect = float(single_action.prior @ single_action.sender_utility[:, 0])
    for scheme in (uninformative(3), full_revelation(3)):
        assert robust_utility(single_action, scheme).value == pytest.approx(expect)


def test_strategy_utility(example32):
    scheme = full_revelation(3)
    rv = robust_utility(example32, scheme)
    assert strategy_utility(example32, scheme, ReceiverStrategy(rv.worst_actions)) == pytest.approx(rv.value)
    matching = ReceiverStrategy({"s0": 0, "s1": 0, "s2": 1})
    assert strategy_utility(example32, scheme, matching) == pytest.approx(0.99)
    assert strategy_utility(example32, scheme, matching, exact=True) == Fraction(99, 100)
    with pytest.raises(MissingResponse):
        strategy_utility(example32, scheme, ReceiverStrategy({"s0": 0}))


def test_sender_best_within_br_dominates(example32):
    scheme = SignalingScheme(["p", "q"], [[0.5, 0.5], [0.7, 0.3], [0.2, 0.8]])
    rv = robust_utility(example32, scheme)
    best = {}
    for ev in evaluate_signals(example32, scheme):
        best[ev.label] = max(ev.br_set, key=lambda a: example32.sender_utility.T[a] @ ev.posterior)
    assert strategy_utility(example32, scheme, ReceiverStrategy(best)) >= rv.value - 1e-12


def test_exact_and_float_agree_off_boundary():
    inst = random_instance(3, 4, 0.1, seed=3)
    rng = np.random.default_rng(0)
    phi = rng.dirichlet(np.ones(3), size=3)
    scheme = SignalingScheme(["a", "b", "c"], phi)
    assert float(robust_utility(inst, scheme, exact=True).value) == pytest.approx(robust_utility(inst, scheme).value, abs=1e-9)


# -- properties ---------------------------------------------------------------

@st.composite
def instance_and_scheme(draw, max_m=4, max_n=4, max_signals=4):
    m = draw(st.integers(1, max_m))
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(1, max_signals))
    seed = draw(st.integers(0, 2**32 - 1))
    delta = draw(st.sampled_from([0.01, 0.05, 0.1, 0.3, 0.7]))
    rng = np.random.default_rng(seed)
    inst = PersuasionInstance(
        [f"w{i}" for i in range(m)], [f"a{i}" for i in range(n)],
        rng.dirichlet(np.ones(m)) if m > 1 else [1.0],
        rng.random((m, n)), rng.random((m, n)), delta,
    )
    phi = rng.dirichlet(np.ones(k), size=m)
    if draw(st.booleans()):
        phi = (phi > 0.4).astype(float)
        phi[phi.sum(axis=1) == 0, 0] = 1.0
        phi /= phi.sum(axis=1, keepdims=True)
    return inst, SignalingScheme([f"s{j}" for j in range(k)], phi)


@settings(max_examples=60, deadline=None)
@given(instance_and_scheme())
def test_bayes_plausibility(data):
    inst, scheme = data
    marg, mus = posteriors(inst, scheme)
    live = marg > 0
    assert np.allclose((marg[live, None] * mus[live]).sum(axis=0), inst.prior, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(instance_and_scheme())
def test_best_response_in_br_set(data):
    inst, scheme = data
    for ev in evaluate_signals(inst, scheme):
        assert ev.best in ev.br_set
        assert best_response(inst, ev.posterior) == ev.best


@settings(max_examples=40, deadline=None)
@given(instance_and_scheme())
def test_robust_is_min_over_strategies(data):
    inst, scheme = data
    evals = evaluate_signals(inst, scheme)
    rv = robust_utility(inst, scheme)
    options = [sorted(ev.br_set) for ev in evals]
    values = [
        strategy_utility(inst, scheme, ReceiverStrategy({ev.label: a for ev, a in zip(evals, choice)}))
        for choice in itertools.product(*options)
    ]
    assert rv.value == pytest.approx(min(values), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(instance_and_scheme(), st.floats(0.01, 0.5), st.floats(0.0, 0.5))
def test_delta_monotonicity(data, d1, extra):
    inst, scheme = data
    lo, hi = inst.with_delta(d1), inst.with_delta(d1 + extra)
    for ev_lo, ev_hi in zip(evaluate_signals(lo, scheme), evaluate_signals(hi, scheme)):
        assert ev_lo.br_set <= ev_hi.br_set
    assert robust_utility(hi, scheme).value <= robust_utility(lo, scheme).value + 1e-12
