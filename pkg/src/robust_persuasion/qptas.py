"""Additive approximation through a grid of posteriors.

Each signal is a triple (centre, best, worst): a k-uniform posterior ``mu_bar``
whose cell holds every posterior with sender utilities within ``eps'`` of
``mu_bar``'s, the action the receiver must prefer, and the action the sender
is charged for. Any action the sender would value clearly below ``worst`` at
the centre must be pushed out of the delta-BR set, so a receiver can hurt
the sender by at most ``4 eps'`` relative to the LP's bookkeeping.

The grid denominator: the sparsification bound ``ceil(ln(2n) / (2 eps'^2))``
and, independently, deterministic rounding (any posterior is within total
variation ``floor(m/2)/k`` of a k-uniform one, so ``k = ceil(floor(m/2)/eps')``
also covers every cell). ``grid="auto"`` takes the smaller.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from . import lp as lpmod
from .errors import SizeGuard, SolverFailure
from .exact import SolverResult, extract_scheme
from .model import PersuasionInstance, evaluate_signals, robust_utility, validate_instance

MAX_LP_VARS = 5_000_000
# each signal carries about 4n rows over m variables; the COO build needs
# roughly 50 bytes per nonzero at peak
MAX_LP_NONZEROS = 10_000_000
MAX_GRID_POINTS = 2_000_000


@dataclass(frozen=True)
class KUniformGrid:
    k: int
    counts: np.ndarray  # integer compositions, one row per point

    @property
    def points(self) -> np.ndarray:
        return self.counts / float(self.k)

    def __len__(self) -> int:
        return self.counts.shape[0]

    def exact_point(self, i: int) -> tuple[Fraction, ...]:
        return tuple(Fraction(int(c), self.k) for c in self.counts[i])


@dataclass(frozen=True)
class QptasSignal:
    center: int
    best: int
    worst: int

    def label(self, actions=None) -> str:
        b = actions[self.best] if actions else f"a{self.best}"
        w = actions[self.worst] if actions else f"a{self.worst}"
        return f"g{self.center}|{b}|{w}"


def k_uniform_grid(m: int, k: int, cap: int = MAX_GRID_POINTS) -> KUniformGrid:
    """All compositions of ``k`` into ``m`` parts, lexicographic, as probability vectors."""
    if m < 1 or k < 1:
        raise ValueError("need m >= 1 and k >= 1")
    count = _kernels.composition_count(m, k)
    if count > cap:
        raise SizeGuard(f"k-uniform grid with m={m}, k={k} has {count} points (cap {cap})")
    return KUniformGrid(k, _kernels.compositions(m, k))


def epsilon_for_grid(n: int, eps: float, log_base: str = "e") -> tuple[float, int]:
    """``(eps', k)`` with ``eps' = eps / 5`` and ``k = ceil(log(2n) / (2 eps'^2))``."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if n < 1:
        raise ValueError("need n >= 1")
    log = {"e": math.log, "2": math.log2}[str(log_base)]
    ep = eps / 5.0
    # guard against 69.0000000001-style float noise pushing the ceiling up
    return ep, max(1, math.ceil(log(2 * n) / (2 * ep * ep) - 1e-9))


def rounding_k(m: int, eps_prime: float) -> int:
    return max(1, math.ceil((m // 2) / eps_prime - 1e-9))


def choose_k(instance: PersuasionInstance, eps: float, grid="auto", log_base: str = "e") -> tuple[float, int]:
    ep, k_alt = epsilon_for_grid(instance.n, eps, log_base)
    if grid == "althofer":
        return ep, k_alt
    if grid == "auto":
        return ep, min(k_alt, rounding_k(instance.m, ep))
    if grid == "rounding":
        return ep, rounding_k(instance.m, ep)
    if isinstance(grid, (int, np.integer)) and grid >= 1:
        return ep, int(grid)
    raise ValueError(f"grid must be 'auto', 'althofer', 'rounding' or a positive integer, got {grid!r}")


@dataclass(frozen=True)
class QptasIndex:
    m: int
    grid: KUniformGrid
    signals: tuple[QptasSignal, ...]
    eps_prime: float

    def phi(self, state: int, signal: int) -> int:
        return signal * self.m + state


def build_qptas_lp(
    instance: PersuasionInstance,
    eps: float,
    grid="auto",
    log_base: str = "e",
    max_vars: int = MAX_LP_VARS,
    max_nonzeros: int = MAX_LP_NONZEROS,
) -> tuple[lpmod.LinearProgram, QptasIndex]:
    validate_instance(instance)
    m, n = instance.m, instance.n
    ep, k = choose_k(instance, eps, grid, log_base)
    G = _kernels.composition_count(m, k)
    nvars = G * n * n * m
    if nvars > max_vars:
        raise SizeGuard(f"grid LP needs {nvars} variables (k={k}, {G} points; cap {max_vars})")
    nnz = nvars * 4 * n
    if nnz > max_nonzeros:
        raise SizeGuard(f"grid LP needs about {nnz} nonzeros (k={k}, {G} points; cap {max_nonzeros})")
    grd = k_uniform_grid(m, k)
    mu0, s, r = instance.prior, instance.sender_utility, instance.receiver_utility
    sbar = grd.points @ s  # (G, n)

    gi, bi, wi = (x.ravel() for x in np.meshgrid(np.arange(G), np.arange(n), np.arange(n), indexing="ij"))
    K = gi.size
    signals = tuple(QptasSignal(int(g), int(b), int(w)) for g, b, w in zip(gi, bi, wi))
    col = np.arange(K)[:, None] * m + np.arange(m)[None, :]  # (K, m) variable ids

    b = lpmod.LpBuilder()
    b.add_variables(K * m)
    b.add_objective(col.ravel(), (mu0[None, :] * s[:, wi].T).ravel())

    S = mu0[:, None] * s  # (m, n)
    R = mu0[:, None] * r
    # cell rows: for each signal and action, both sides
    sig = np.repeat(np.arange(K), n)
    act = np.tile(np.arange(n), K)
    base = S[:, act].T - mu0[None, :] * sbar[gi[sig], act][:, None]  # (K*n, m)
    for sign, rel in ((1.0, lpmod.GE), (-1.0, lpmod.LE)):
        vals = base + sign * ep * mu0[None, :]
        _add_block(b, col[sig], vals, rel)
    # the best action beats every other action
    keep = act != bi[sig]
    s2, a2 = sig[keep], act[keep]
    _add_block(b, col[s2], (R[:, bi[s2]] - R[:, a2]).T, lpmod.GE)
    # actions clearly worse for the sender than ``worst`` are pushed out of the BR set
    excl = sbar[gi[sig], act] < sbar[gi[sig], wi[sig]] - 2 * ep
    s3, a3 = sig[excl], act[excl]
    _add_block(b, col[s3], (R[:, bi[s3]] - R[:, a3] - instance.delta * mu0[:, None]).T, lpmod.GE)
    # simplex rows
    b.add_rows(np.tile(np.arange(m), K), col.ravel(), np.ones(K * m), np.full(m, lpmod.EQ), np.ones(m))
    return b.build(), QptasIndex(m, grd, signals, ep)


def _add_block(b: lpmod.LpBuilder, cols: np.ndarray, vals: np.ndarray, rel: int) -> None:
    rows, m = cols.shape
    b.add_rows(np.repeat(np.arange(rows), m), cols.ravel(), vals.ravel(), np.full(rows, rel), np.zeros(rows))


def solve_qptas(
    instance: PersuasionInstance,
    eps: float,
    *,
    grid="auto",
    log_base: str = "e",
    backend: str = "highs",
    tolerance: float = lpmod.DEFAULT_TOL,
) -> SolverResult:
    """Approximately optimal scheme; ``value`` is the grid LP optimum."""
    t0 = time.perf_counter()
    program, idx = build_qptas_lp(instance, eps, grid, log_base)
    sol = lpmod.solve(program, tolerance=tolerance, backend=backend)
    if sol.status is not lpmod.Status.OPTIMAL:
        raise SolverFailure(f"grid LP returned {sol.status.value}: {sol.message}")
    K = len(idx.signals)
    phi = sol.primal.reshape(K, instance.m).T
    labels = [sg.label(instance.actions) for sg in idx.signals]
    scheme, keep = extract_scheme(instance, phi, labels)
    rv = robust_utility(instance, scheme)
    return SolverResult(
        scheme=scheme,
        value=sol.objective_value,
        per_signal=evaluate_signals(instance, scheme),
        tuples=[idx.signals[j] for j in keep],
        realized=float(rv.value),
        method="qptas",
        lp_vars=program.num_vars,
        lp_rows=program.num_rows,
        wall_time=time.perf_counter() - t0,
        extra={
            "eps": eps,
            "eps_prime": idx.eps_prime,
            "k": idx.grid.k,
            "grid_points": len(idx.grid),
            "signals": K,
            "centers": [idx.grid.points[sg.center] for sg in (idx.signals[j] for j in keep)],
        },
    )
