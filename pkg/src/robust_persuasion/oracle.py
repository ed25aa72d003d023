"""Independent checks on the solvers.

Everything here is deliberately naive: per-tuple LPs over the whole signal
space, concavification over a posterior grid, and exhaustive few-signal
search. The grid-based functions return values achieved by explicit
schemes, so they are lower bounds on the robust optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import lp as lpmod
from .errors import SizeGuard, SolverFailure
from .exact import enumerate_signal_space
from .model import (
    TIE_EPS,
    PersuasionInstance,
    SignalingScheme,
    SubsetActionTuple,
    _offset,
    evaluate_signals,
    validate_instance,
    validate_scheme,
)
from .smallstate import feasibility_margin

BRUTE_FORCE_MAX_N = 12
GRID_MAX_POINTS = 2_000_000
JITTER = 1e-9


def brute_force_feasible_tuples(instance: PersuasionInstance, backend: str = "highs") -> list[SubsetActionTuple]:
    """Every tuple of the full space whose margin LP is positive."""
    if instance.n > BRUTE_FORCE_MAX_N:
        raise SizeGuard(f"brute force over {instance.n} actions exceeds the cap of {BRUTE_FORCE_MAX_N}")
    space = enumerate_signal_space(instance.n)
    return [t for t in space if feasibility_margin(instance, t, backend=backend).feasible]


def grid_points(m: int, k: int, max_points: int = GRID_MAX_POINTS) -> np.ndarray:
    count = _kernels.composition_count(m, k)
    if count > max_points:
        raise SizeGuard(f"{count} grid points exceeds the cap of {max_points}")
    return _kernels.compositions(m, k) / float(k)


def robust_values(instance: PersuasionInstance, mus: np.ndarray, tie_tolerance: float = 0.0) -> np.ndarray:
    """``f(mu) = min over the delta-BR set of s(mu, a)`` for each row of ``mus``."""
    _, _, wval, _ = _kernels.evaluate_posteriors(
        mus, instance.sender_utility, instance.receiver_utility, _offset(instance.delta, tie_tolerance), TIE_EPS
    )
    return wval


def _scheme_from_split(instance: PersuasionInstance, mus: np.ndarray, weights: np.ndarray, labels) -> SignalingScheme:
    joint = weights[None, :] * mus.T  # (m, K)
    mu0 = instance.prior
    phi = np.zeros_like(joint)
    pos = mu0 > 0
    phi[pos] = joint[pos] / mu0[pos, None]
    phi = np.clip(phi, 0.0, None)
    sums = phi.sum(axis=1)
    phi[~pos] = 0.0
    phi[~pos, 0] = 1.0
    phi[pos] /= sums[pos, None]
    return SignalingScheme(labels, phi)


@dataclass
class GridResult:
    value: float
    scheme: SignalingScheme
    posteriors: np.ndarray
    weights: np.ndarray
    k: int


def grid_search_optimum(
    instance: PersuasionInstance, k: int, *, jitter: bool = False, backend: str = "highs"
) -> GridResult:
    """Best Bayes-plausible mixture of k-uniform posteriors, with a witness scheme."""
    validate_instance(instance)
    pts = grid_points(instance.m, k)
    if jitter:
        pts = (1.0 - JITTER) * pts + JITTER * instance.prior
    f = robust_values(instance, pts)
    N, m = pts.shape
    b = lpmod.LpBuilder()
    b.add_variables(N)
    b.add_objective(np.arange(N), f)
    rows, cols = np.nonzero(pts.T)
    b.add_rows(rows, cols, pts.T[rows, cols], np.full(m, lpmod.EQ), instance.prior)
    b.add_row(np.arange(N), np.ones(N), lpmod.EQ, 1.0)
    sol = lpmod.solve(b.build(), backend=backend)
    if sol.status is not lpmod.Status.OPTIMAL:
        raise SolverFailure(f"grid LP returned {sol.status.value}: {sol.message}")
    p = np.where(sol.primal > 1e-12, sol.primal, 0.0)
    used = np.flatnonzero(p)
    mus, w = pts[used], p[used] / p[used].sum()
    labels = [f"g{i}" for i in used]
    return GridResult(float(sol.objective_value), _scheme_from_split(instance, mus, w, labels), mus, w, k)


def canonicalize_scheme(instance: PersuasionInstance, scheme: SignalingScheme) -> SignalingScheme:
    """Merge signals sharing (BR set, best response); zero-mass signals join the first group."""
    validate_scheme(scheme, instance.m)
    evals = evaluate_signals(instance, scheme)
    if not evals:
        raise SolverFailure("scheme has no positive-probability signal")
    col = {label: j for j, label in enumerate(scheme.signal_labels)}
    groups: dict[tuple[int, int], list[int]] = {}
    for ev in evals:
        key = SubsetActionTuple(ev.br_set, ev.best).key
        groups.setdefault(key, []).append(col[ev.label])
    live = {j for cols in groups.values() for j in cols}
    dead = [j for j in range(scheme.num_signals) if j not in live]
    keys = list(groups)
    groups[keys[0]].extend(dead)
    phi = np.column_stack([scheme.conditionals[:, groups[key]].sum(axis=1) for key in keys])
    labels = [SubsetActionTuple.from_mask(*key).label(instance.actions) for key in keys]
    return SignalingScheme(labels, phi)


def _denominator(resolution) -> int:
    if isinstance(resolution, (int, np.integer)) and resolution >= 1:
        return int(resolution)
    r = float(resolution)
    if 0 < r < 1:
        return int(round(1.0 / r))
    raise ValueError(f"resolution must be an integer denominator or a step in (0, 1), got {resolution}")


def best_k_signal_search(
    instance: PersuasionInstance, k: int, resolution=50, *, max_points: int = 20_000, include_prior: bool = True
) -> GridResult:
    """Best scheme with at most ``k`` signals whose posteriors lie on the grid.

    With ``include_prior`` the prior itself joins the candidate posteriors, so
    ``k = 1`` always finds the uninformative scheme.
    """
    validate_instance(instance)
    if k < 1:
        raise ValueError("k must be >= 1")
    denom = _denominator(resolution)
    pts = grid_points(instance.m, denom, max_points)
    if include_prior:
        pts = np.vstack([pts, instance.prior])
    f = robust_values(instance, pts)
    val, idx, w = _kernels.best_split(pts, f, instance.prior, k)
    if not np.isfinite(val):
        raise SolverFailure(f"no Bayes-plausible split of the prior over <= {k} grid posteriors")
    sel = idx >= 0
    idx, w = idx[sel], w[sel]
    keep = w > 0
    idx, w = idx[keep], w[keep] / w[keep].sum()
    labels = [f"g{i}" for i in idx]
    return GridResult(float(val), _scheme_from_split(instance, pts[idx], w, labels), pts[idx], w, denom)
