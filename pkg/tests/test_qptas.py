import math
from fractions import Fraction

import numpy as np
import pytest

from robust_persuasion import (
    SizeGuard,
    apples_instance,
    build_qptas_lp,
    epsilon_for_grid,
    k_uniform_grid,
    random_instance,
    robust_utility,
    solve_exact,
    solve_qptas,
)
from robust_persuasion.qptas import choose_k, rounding_k


def test_grid_examples():
    g = k_uniform_grid(2, 2)
    assert np.allclose(g.points, [[0, 1], [0.5, 0.5], [1, 0]])
    assert len(k_uniform_grid(3, 1)) == 3
    assert len(k_uniform_grid(2, 4)) == 5


@pytest.mark.parametrize("m,k", [(1, 5), (2, 7), (3, 6), (4, 5), (5, 3)])
def test_grid_counts_and_exact_sums(m, k):
    g = k_uniform_grid(m, k)
    assert len(g) == math.comb(k + m - 1, m - 1)
    assert np.all(g.counts.sum(axis=1) == k)
    assert all(sum(g.exact_point(i)) == 1 for i in range(len(g)))
    assert [tuple(r) for r in g.counts] == sorted(tuple(r) for r in g.counts)


def test_grid_guard():
    with pytest.raises(SizeGuard):
        k_uniform_grid(6, 200, cap=10_000)


def test_epsilon_for_grid():
    assert epsilon_for_grid(2, 0.5) == (pytest.approx(0.1), 70)
    assert epsilon_for_grid(1, 1.0) == (pytest.approx(0.2), 9)
    assert epsilon_for_grid(2, 0.5, log_base="2")[1] == math.ceil(2 / 0.02)
    ks = [epsilon_for_grid(3, e)[1] for e in (0.5, 0.2, 0.1, 0.05)]
    assert ks == sorted(ks) and ks[-1] > 5_000


def test_choose_k_modes():
    inst = random_instance(3, 5, 0.1, 0)
    assert choose_k(inst, 0.3, "althofer")[1] == epsilon_for_grid(5, 0.3)[1] == 320
    assert choose_k(inst, 0.3, "auto")[1] == rounding_k(3, 0.06) == 17
    assert choose_k(inst, 0.3, 5)[1] == 5


def test_signal_count_formula():
    inst = random_instance(2, 2, 0.1, 0)
    lp, idx = build_qptas_lp(inst, 0.5, grid="althofer")
    k = math.ceil(12.5 * math.log(4) / 0.25)
    assert idx.grid.k == k == 70
    assert len(idx.signals) == (k + 1) * 4 == 284
    assert lp.num_vars == 284 * 2
    assert len(idx.signals) <= 4 * 2 ** k


def test_lp_guard():
    inst = random_instance(3, 5, 0.1, 0)
    with pytest.raises(SizeGuard):
        build_qptas_lp(inst, 0.3, grid="althofer")


def test_single_state():
    inst = random_instance(1, 3, 0.1, 4)
    lp, idx = build_qptas_lp(inst, 0.5)
    assert len(idx.grid) == 1
    res = solve_qptas(inst, 0.5)
    assert res.realized == pytest.approx(solve_exact(inst).value, abs=1e-9)


def test_single_action(single_action):
    res = solve_qptas(single_action, 0.9)
    assert res.value == pytest.approx(float(single_action.prior @ single_action.sender_utility[:, 0]))


def test_example32(example32):
    res = solve_qptas(example32, 0.25)
    assert res.realized >= 0.74
    assert robust_utility(example32, res.scheme).value == pytest.approx(res.realized)


def test_apples(apples):
    res = solve_qptas(apples, 0.3)
    assert abs(res.realized - solve_exact(apples).value) <= 0.3


@pytest.mark.parametrize("seed", range(8))
def test_sandwich_and_cells(seed):
    inst = random_instance(3, 3 + seed % 2, [0.05, 0.1, 0.3][seed % 3], 600 + seed)
    exact = solve_exact(inst).value
    res = solve_qptas(inst, 0.3)
    ep = res.extra["eps_prime"]
    assert res.value >= exact - ep - 1e-6
    assert res.realized >= res.value - 4 * ep - 1e-6
    assert res.realized >= exact - 0.3
    for ev, center in zip(res.per_signal, res.extra["centers"]):
        gap = np.abs(ev.posterior @ inst.sender_utility - center @ inst.sender_utility)
        assert gap.max() <= ep + 1e-8


@pytest.mark.parametrize("m", [2, 3, 4, 5])
def test_grid_covering(m):
    # sampled check: every posterior has a grid point within eps' on all sender coordinates
    rng = np.random.default_rng(m)
    ep = 0.06
    k = rounding_k(m, ep)
    pts = k_uniform_grid(m, k).points
    for _ in range(10):
        s = rng.random((m, 6))
        mus = rng.dirichlet(np.ones(m) * rng.choice([0.2, 1.0, 5.0]), size=100)
        dist = np.abs((mus @ s)[:, None, :] - (pts @ s)[None, :, :]).max(axis=2).min(axis=1)
        assert dist.max() <= ep + 1e-12
