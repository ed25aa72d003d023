import math

import numpy as np
import pytest

from robust_persuasion import build_robust_lp, enumerate_signal_space
from robust_persuasion.errors import DimensionMismatch
from robust_persuasion.lp import EQ, GE, LE, LpBuilder, Status, check_feasible, solve, to_lp_format

BACKENDS = ["highs", "simplex"]


def one_var(rel=None, rhs=None, obj=1.0):
    b = LpBuilder()
    b.add_variables(1, names=["x"])
    b.add_objective([0], obj)
    if rel is not None:
        b.add_row([0], [1.0], rel, rhs)
    return b.build()


@pytest.mark.parametrize("backend", BACKENDS)
def test_bounded(backend):
    sol = solve(one_var(LE, 3.0), backend=backend)
    assert sol.status is Status.OPTIMAL and sol.objective_value == pytest.approx(3.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible(backend):
    assert solve(one_var(LE, -1.0), backend=backend).status is Status.INFEASIBLE


@pytest.mark.parametrize("backend", BACKENDS)
def test_unbounded(backend):
    assert solve(one_var(), backend=backend).status is Status.UNBOUNDED


@pytest.mark.parametrize("backend", BACKENDS)
def test_empty_and_zero_objective(backend):
    sol = solve(LpBuilder().build(), backend=backend)
    assert sol.status is Status.OPTIMAL and sol.objective_value == 0.0
    sol = solve(one_var(LE, 2.0, obj=0.0), backend=backend)
    assert sol.status is Status.OPTIMAL and sol.objective_value == 0.0


@pytest.mark.parametrize("backend", BACKENDS)
def test_mixed_bounds_and_relations(backend):
    # max x + 2y - z, free y in [-inf, 4], z in [1, 3], x >= 0
    b = LpBuilder()
    b.add_variables(1)
    b.add_variables(1, lower=-math.inf, upper=4.0)
    b.add_variables(1, lower=1.0, upper=3.0)
    b.add_objective([0, 1, 2], [1.0, 2.0, -1.0])
    b.add_row([0, 1], [1, 1], LE, 5.0)
    b.add_row([0, 2], [1, -1], GE, -10.0)
    b.add_row([1, 2], [1, 1], EQ, 5.0)
    sol = solve(b.build(), backend=backend)
    assert sol.status is Status.OPTIMAL
    # y + z = 5 with y <= 4 -> z >= 1; objective x + 2y - z = x + 3y - 5, x + y <= 5
    assert sol.objective_value == pytest.approx(8.0, abs=1e-8)
    assert check_feasible(b.build(), sol.primal).feasible


def test_backends_agree_on_random_lps():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n, k = 6, 4
        b = LpBuilder()
        b.add_variables(n)
        b.add_objective(np.arange(n), rng.standard_normal(n))
        A = rng.random((k, n))
        rows, cols = np.nonzero(A)
        b.add_rows(rows, cols, A[rows, cols], np.full(k, LE), rng.random(k) + 0.5)
        lp = b.build()
        s1, s2 = solve(lp, backend="highs"), solve(lp, backend="simplex")
        assert s1.status is s2.status is Status.OPTIMAL
        assert s1.objective_value == pytest.approx(s2.objective_value, abs=1e-8)


def test_check_feasible():
    lp = one_var(GE, 1.0)
    rep = check_feasible(lp, [0.0])
    assert not rep.feasible and rep.worst_violation == pytest.approx(1.0) and rep.worst_row == "row 0"
    assert check_feasible(lp, [1.0]).feasible
    with pytest.raises(DimensionMismatch):
        check_feasible(lp, [1.0, 2.0])


def test_builder_rejects_bad_input():
    b = LpBuilder()
    b.add_variables(1)
    b.add_row([3], [1.0], LE, 1.0)
    with pytest.raises(DimensionMismatch):
        b.build()
    b = LpBuilder()
    b.add_variables(1)
    b.add_row([0], [np.nan], LE, 1.0)
    with pytest.raises(ValueError):
        b.build()


def test_robust_lp_round_trip(example32):
    lp, _ = build_robust_lp(example32, enumerate_signal_space(2))
    sol = solve(lp)
    assert sol.status is Status.OPTIMAL
    assert check_feasible(lp, sol.primal, 1e-8).feasible
    assert sol.objective_value == pytest.approx(lp.objective @ sol.primal, abs=1e-12)


@pytest.mark.parametrize("scale", [0.5, 3.0, 100.0])
def test_objective_scaling(example32, scale):
    lp, _ = build_robust_lp(example32, enumerate_signal_space(2))
    base = solve(lp)
    scaled = type(lp)(**{**lp.__dict__, "objective": lp.objective * scale})
    sol = solve(scaled)
    assert sol.status is base.status
    assert sol.objective_value == pytest.approx(scale * base.objective_value, rel=1e-8)


def test_lp_format_export():
    b = LpBuilder()
    b.add_variables(2, names=["x", "y[1]"])
    b.add_variables(1, lower=-math.inf)
    b.add_objective([0, 1], [1.0, -2.5])
    b.add_row([0, 1, 2], [1.0, 1.0, -1.0], LE, 4.0)
    b.add_row([1], [1.0], EQ, 1.0)
    text = to_lp_format(b.build())
    assert text.splitlines()[1] == "Maximize"
    assert " obj: 1 x - 2.5 y_1_" in text
    assert " c0: 1 x + 1 y_1_ - 1 x2 <= 4" in text
    assert " c1: 1 y_1_ = 1" in text
    assert " x2 free" in text
    assert text.rstrip().endswith("End")


def test_constraints_iterator():
    lp = one_var(GE, 2.0)
    assert list(lp.constraints) == [({0: 1.0}, ">=", 2.0)]
