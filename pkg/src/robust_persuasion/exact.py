"""Optimal robust signaling through the subset-action LP.

Every signal of a scheme can be labelled by the pair (A, a~) of its delta-best
response set and best response; merging signals with equal labels never hurts
the sender, so an optimal scheme needs at most one signal per pair. The LP
below carries one block of variables per pair: ``phi[w, t]`` is the
probability of sending tuple ``t`` in state ``w`` and ``x[t]`` is a lower bound
on the sender's (unnormalised) utility for every action in ``A``.

Families of rows per tuple ``t = (A, a~)``:

* sender    ``sum_w mu0 phi s(w, a) - x_t >= 0``            for ``a in A``
* best      ``sum_w mu0 phi (r(w, a~) - r(w, a)) >= 0``      for ``a in A, a != a~``
* exclude   ``sum_w mu0 phi (r(w, a~) - r(w, a) - delta) >= 0`` for ``a not in A``

plus one simplex row per state. Passing ``exclusion="leq"`` flips the last
family, which is only useful for measuring what the flipped sign would do.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import lp as lpmod
from .errors import SizeGuard, SolverFailure
from .model import (
    PersuasionInstance,
    SignalEvaluation,
    SignalingScheme,
    SubsetActionTuple,
    evaluate_signals,
    robust_utility,
    validate_instance,
)

MAX_ACTIONS = 16
# drop LP mass below this when reading a scheme off the primal
PHI_ZERO = 1e-12
# tuples whose prior-weighted mass falls below this are not emitted
MASS_ZERO = 1e-14
_PRUNE_TOL = 1e-12


@dataclass(frozen=True)
class SignalSpace:
    tuples: tuple[SubsetActionTuple, ...]

    def __post_init__(self):
        keys = [t.key for t in self.tuples]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (A, best) pairs in signal space")

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    @property
    def masks(self) -> np.ndarray:
        return np.array([t.mask for t in self.tuples], dtype=np.int64)

    @property
    def bests(self) -> np.ndarray:
        return np.array([t.best for t in self.tuples], dtype=np.int64)

    def membership(self, n: int) -> np.ndarray:
        """Boolean (|space|, n) table of ``a in A``."""
        return (self.masks[:, None] >> np.arange(n)[None, :]) & 1 == 1


@dataclass
class SolverResult:
    """Scheme and optimum returned by every solver.

    ``value`` is the LP optimum; ``realized`` re-evaluates the emitted scheme
    under the robust semantics. ``tuples`` names the signal behind each
    scheme column (a ``SubsetActionTuple`` or a grid signal).
    """

    scheme: SignalingScheme
    value: float
    per_signal: list[SignalEvaluation]
    tuples: list[Any]
    realized: float
    method: str
    lp_vars: int = 0
    lp_rows: int = 0
    wall_time: float = 0.0
    extra: dict[str, Any] = field(default_factory=dict)


def _check_n(n: int, cap: int) -> None:
    if n < 1:
        raise ValueError("need at least one action")
    if n > cap:
        raise SizeGuard(f"{n} actions exceeds the cap of {cap} ({n * 2 ** (n - 1)} tuples)")


def enumerate_signal_space(n: int, cap: int = MAX_ACTIONS) -> SignalSpace:
    """All (A, a~) with a~ in A; subsets by increasing bitmask, then a~ by index."""
    _check_n(n, cap)
    out = [
        SubsetActionTuple.from_mask(mask, a)
        for mask in range(1, 1 << n)
        for a in range(n)
        if mask >> a & 1
    ]
    return SignalSpace(tuple(out))


def live_signal_space(instance: PersuasionInstance, cap: int = MAX_ACTIONS) -> SignalSpace:
    """Tuples of the full space not forced to zero mass by a single LP row.

    For a fixed best action a~, an action whose receiver gap to a~ stays below
    delta on every positive-prior state can never be excluded, and an action
    strictly better than a~ on every such state rules a~ out entirely. Dropping
    the corresponding tuples leaves the LP optimum unchanged.
    """
    n = instance.n
    _check_n(n, cap)
    support = instance.prior > 0
    r = instance.receiver_utility[support]
    out = []
    for best in range(n):
        gap = (r[:, [best]] - r).max(axis=0)
        must = gap < instance.delta - _PRUNE_TOL
        forbidden = gap < -_PRUNE_TOL
        forbidden[best] = False
        if forbidden.any():
            continue
        must[best] = True
        base = int(sum(1 << a for a in np.flatnonzero(must)))
        free = np.flatnonzero(~must)
        for sub in range(1 << free.size):
            mask = base
            for i, a in enumerate(free):
                if sub >> i & 1:
                    mask |= 1 << int(a)
            out.append((mask, best))
    out.sort()
    return SignalSpace(tuple(SubsetActionTuple.from_mask(mk, b) for mk, b in out))


@dataclass(frozen=True)
class RobustLpIndex:
    """Variable layout: ``phi(w, t)`` at ``t*m + w``, then ``x_t`` at ``m*T + t``."""

    m: int
    space: SignalSpace

    def phi(self, state: int, t: int) -> int:
        return t * self.m + state

    def x(self, t: int) -> int:
        return self.m * len(self.space) + t


def build_robust_lp(
    instance: PersuasionInstance,
    space: SignalSpace | None = None,
    exclusion: str = "geq",
    max_vars: int = 20_000_000,
    names: bool = False,
) -> tuple[lpmod.LinearProgram, RobustLpIndex]:
    if exclusion not in ("geq", "leq"):
        raise ValueError("exclusion must be 'geq' or 'leq'")
    m, n = instance.m, instance.n
    if space is None:
        space = enumerate_signal_space(n)
    T = len(space)
    if (m + 1) * T > max_vars:
        raise SizeGuard(f"LP would have {(m + 1) * T} variables (cap {max_vars})")
    mu0 = instance.prior
    S = mu0[:, None] * instance.sender_utility  # (m, n)
    R = mu0[:, None] * instance.receiver_utility
    inA = space.membership(n)
    best = space.bests
    idx = RobustLpIndex(m, space)

    b = lpmod.LpBuilder()
    var_names = None
    if names:
        labels = [t.label(instance.actions) for t in space]
        var_names = [f"phi[{instance.states[w]},{labels[t]}]" for t in range(T) for w in range(m)]
        var_names += [f"x[{lab}]" for lab in labels]
    b.add_variables(m * T, names=var_names[: m * T] if names else None)
    b.add_variables(T, lower=-np.inf, names=var_names[m * T :] if names else None)
    b.add_objective(np.arange(m * T, m * T + T), 1.0)

    w = np.arange(m)
    # sender rows, one per (t, a in A)
    tt, aa = np.nonzero(inA)
    k = tt.size
    rows = np.concatenate([np.repeat(np.arange(k), m), np.arange(k)])
    cols = np.concatenate([(tt[:, None] * m + w).ravel(), m * T + tt])
    vals = np.concatenate([S[:, aa].T.ravel(), -np.ones(k)])
    b.add_rows(rows, cols, vals, np.full(k, lpmod.GE), np.zeros(k))

    # best-response rows
    tt, aa = np.nonzero(inA & (np.arange(n)[None, :] != best[:, None]))
    k = tt.size
    vals = (R[:, best[tt]] - R[:, aa]).T.ravel()
    b.add_rows(np.repeat(np.arange(k), m), (tt[:, None] * m + w).ravel(), vals, np.full(k, lpmod.GE), np.zeros(k))

    # exclusion rows
    tt, aa = np.nonzero(~inA)
    k = tt.size
    vals = (R[:, best[tt]] - R[:, aa] - instance.delta * mu0[:, None]).T.ravel()
    rel = lpmod.GE if exclusion == "geq" else lpmod.LE
    b.add_rows(np.repeat(np.arange(k), m), (tt[:, None] * m + w).ravel(), vals, np.full(k, rel), np.zeros(k))

    # one simplex row per state
    b.add_rows(np.tile(w, T), np.arange(m * T), np.ones(m * T), np.full(m, lpmod.EQ), np.ones(m))
    return b.build(), idx


def extract_scheme(
    instance: PersuasionInstance, phi: np.ndarray, labels: Sequence[str]
) -> tuple[SignalingScheme, np.ndarray]:
    """Clean an LP's ``(m, T)`` conditional block into a valid scheme.

    Returns the scheme and the kept column indices.
    """
    phi = np.where(phi < PHI_ZERO, 0.0, phi)
    mass = instance.prior @ phi
    keep = np.flatnonzero(mass > MASS_ZERO)
    if keep.size == 0:
        raise SolverFailure("LP solution carries no probability mass")
    out = phi[:, keep]
    sums = out.sum(axis=1)
    empty = sums <= 0.0
    if empty.any():  # zero-prior states whose mass sat on dropped columns
        out[empty, 0] = 1.0
        sums[empty] = 1.0
    out = out / sums[:, None]
    return SignalingScheme([labels[j] for j in keep], out), keep


def solve_exact(
    instance: PersuasionInstance,
    *,
    prune: bool = True,
    exclusion: str = "geq",
    backend: str = "highs",
    tolerance: float = lpmod.DEFAULT_TOL,
    cap: int = MAX_ACTIONS,
) -> SolverResult:
    """Optimal robust scheme over the (optionally pruned) subset-action space."""
    validate_instance(instance)
    t0 = time.perf_counter()
    if prune and exclusion == "geq":
        space = live_signal_space(instance, cap)
    else:
        space = enumerate_signal_space(instance.n, cap)
    result = solve_on_space(instance, space, exclusion=exclusion, backend=backend, tolerance=tolerance)
    result.method = "exact"
    result.wall_time = time.perf_counter() - t0
    result.extra["tuples_in_lp"] = len(space)
    return result


def solve_on_space(
    instance: PersuasionInstance,
    space: SignalSpace,
    *,
    exclusion: str = "geq",
    backend: str = "highs",
    tolerance: float = lpmod.DEFAULT_TOL,
) -> SolverResult:
    program, idx = build_robust_lp(instance, space, exclusion=exclusion)
    sol = lpmod.solve(program, tolerance=tolerance, backend=backend)
    if sol.status is not lpmod.Status.OPTIMAL:
        raise SolverFailure(f"robust LP returned {sol.status.value}: {sol.message}")
    m, T = instance.m, len(space)
    phi = sol.primal[: m * T].reshape(T, m).T
    labels = [t.label(instance.actions) for t in space]
    scheme, keep = extract_scheme(instance, phi, labels)
    rv = robust_utility(instance, scheme)
    return SolverResult(
        scheme=scheme,
        value=sol.objective_value,
        per_signal=evaluate_signals(instance, scheme),
        tuples=[space.tuples[j] for j in keep],
        realized=float(rv.value),
        method="exact",
        lp_vars=program.num_vars,
        lp_rows=program.num_rows,
    )
