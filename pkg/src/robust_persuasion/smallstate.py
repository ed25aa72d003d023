"""Solver for instances with few states.

Only tuples (A, a~) realized by some posterior can carry mass in the
subset-action LP. Feasible tuples form a connected subgraph of the graph
linking tuples that differ by one swap, removal or addition, so a
depth-first search from the prior's own tuple finds all of them while
checking only the closed neighbourhood of the feasible set.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import lp as lpmod
from .errors import SeedInfeasible, SolverFailure
from .exact import SignalSpace, SolverResult, solve_on_space
from .model import PersuasionInstance, SubsetActionTuple, best_response, br_delta_set, validate_instance

log = logging.getLogger(__name__)

MARGIN_THRESHOLD = 1e-9
PARANOID_MAX_N = 8


@dataclass(frozen=True)
class FeasibilityVerdict:
    tuple: SubsetActionTuple
    margin: float  # -inf when the margin LP is infeasible
    witness: np.ndarray | None

    @property
    def feasible(self) -> bool:
        return self.margin > MARGIN_THRESHOLD


@dataclass
class ExplorationReport:
    feasible: list[SubsetActionTuple]
    checked: int
    frontier_trace: list[SubsetActionTuple] = field(default_factory=list)
    verdicts: dict[tuple[int, int], FeasibilityVerdict] = field(default_factory=dict, repr=False)
    paranoid_mismatch: list[SubsetActionTuple] | None = None


def margin_lp(instance: PersuasionInstance, tup: SubsetActionTuple) -> lpmod.LinearProgram:
    """Maximize eps over (mu, eps): members within delta - eps, outsiders at least delta behind."""
    m, n = instance.m, instance.n
    R = instance.receiver_utility
    best = tup.best
    diff = (R[:, [best]] - R).T  # row a: r(., best) - r(., a)
    members = np.array(sorted(tup.br_set))
    others = np.array([a for a in range(n) if a not in tup.br_set], dtype=int)
    inner = members[members != best]
    blocks, rel, rhs = [], [], []
    if inner.size:  # best is a receiver-optimal member
        blocks.append(np.hstack([diff[inner], np.zeros((inner.size, 1))]))
        rel += [lpmod.GE] * inner.size
        rhs += [0.0] * inner.size
    # every member (best included, which caps eps at delta) stays within delta - eps
    blocks.append(np.hstack([diff[members], np.ones((members.size, 1))]))
    rel += [lpmod.LE] * members.size
    rhs += [instance.delta] * members.size
    if others.size:
        blocks.append(np.hstack([diff[others], np.zeros((others.size, 1))]))
        rel += [lpmod.GE] * others.size
        rhs += [instance.delta] * others.size
    blocks.append(np.concatenate([np.ones(m), [0.0]])[None, :])
    rel.append(lpmod.EQ)
    rhs.append(1.0)
    obj = np.zeros(m + 1)
    obj[m] = 1.0
    return lpmod.LinearProgram(
        num_vars=m + 1,
        objective=obj,
        matrix=sp.csr_matrix(np.vstack(blocks)),
        relations=np.array(rel, dtype=np.int8),
        rhs=np.array(rhs, dtype=float),
        lower=np.concatenate([np.zeros(m), [-np.inf]]),
        upper=np.full(m + 1, np.inf),
    )


def feasibility_margin(
    instance: PersuasionInstance, tup: SubsetActionTuple, backend: str = "highs"
) -> FeasibilityVerdict:
    """Largest slack by which some posterior realizes ``tup`` as (BR set, best response)."""
    if tup.best not in tup.br_set:
        raise ValueError("best action must belong to the BR set")
    if max(tup.br_set) >= instance.n:
        raise ValueError("tuple references an action index out of range")
    sol = lpmod.solve(margin_lp(instance, tup), backend=backend)
    if sol.status is lpmod.Status.INFEASIBLE:
        return FeasibilityVerdict(tup, -np.inf, None)
    if sol.status is not lpmod.Status.OPTIMAL:
        raise SolverFailure(f"margin LP for {tup.label()} returned {sol.status.value}: {sol.message}")
    margin = sol.primal[instance.m]
    mu = np.clip(sol.primal[: instance.m], 0.0, None)
    mu /= mu.sum()
    if 0.0 < margin <= MARGIN_THRESHOLD:
        log.info("tuple %s has margin %.3g <= threshold; treated as infeasible", tup.label(), margin)
    return FeasibilityVerdict(tup, float(margin), mu)


def neighbors(tup: SubsetActionTuple, n: int) -> list[SubsetActionTuple]:
    """Tuples one swap, removal or addition away from ``tup``."""
    out = []
    A, best = tup.br_set, tup.best
    for a in sorted(A):
        if a == best:
            continue
        out.append(SubsetActionTuple(A - {a}, best))
        out.append(SubsetActionTuple(A, a))
    for a in range(n):
        if a not in A:
            out.append(SubsetActionTuple(A | {a}, best))
    return out


def seed_tuple(instance: PersuasionInstance) -> SubsetActionTuple:
    return SubsetActionTuple(br_delta_set(instance, instance.prior), best_response(instance, instance.prior))


def explore(
    instance: PersuasionInstance,
    *,
    paranoid: bool = False,
    backend: str = "highs",
    trace: bool = True,
) -> ExplorationReport:
    """Depth-first search for every feasible tuple, starting from the prior's tuple."""
    validate_instance(instance)
    seed = seed_tuple(instance)
    visited = {seed.key}
    stack = [seed]
    feasible, order, verdicts = [], [], {}
    checked = 0
    while stack:
        tup = stack.pop()
        verdict = feasibility_margin(instance, tup, backend=backend)
        checked += 1
        verdicts[tup.key] = verdict
        if trace:
            order.append(tup)
        if not verdict.feasible:
            if checked == 1:
                raise SeedInfeasible(f"seed tuple {tup.label(instance.actions)} has margin {verdict.margin}")
            continue
        feasible.append(tup)
        for nb in reversed(neighbors(tup, instance.n)):
            if nb.key not in visited:
                visited.add(nb.key)
                stack.append(nb)
    feasible.sort(key=lambda t: t.key)
    report = ExplorationReport(feasible, checked, order, verdicts)
    if paranoid and instance.n <= PARANOID_MAX_N:
        from .oracle import brute_force_feasible_tuples

        brute = brute_force_feasible_tuples(instance, backend=backend)
        found = {t.key for t in feasible}
        missing = [t for t in brute if t.key not in found]
        report.paranoid_mismatch = missing
        if missing:
            log.warning("exploration missed %d feasible tuples; adding them", len(missing))
            report.feasible = sorted(feasible + missing, key=lambda t: t.key)
    return report


def solve_small_states(
    instance: PersuasionInstance,
    *,
    paranoid: bool = False,
    backend: str = "highs",
    tolerance: float = lpmod.DEFAULT_TOL,
) -> SolverResult:
    t0 = time.perf_counter()
    report = explore(instance, paranoid=paranoid, backend=backend)
    result = solve_on_space(instance, SignalSpace(tuple(report.feasible)), backend=backend, tolerance=tolerance)
    result.method = "small-states"
    result.wall_time = time.perf_counter() - t0
    result.extra.update(feasible_tuples=len(report.feasible), margin_lps=report.checked)
    if report.paranoid_mismatch is not None:
        result.extra["paranoid_missing"] = len(report.paranoid_mismatch)
    return result
