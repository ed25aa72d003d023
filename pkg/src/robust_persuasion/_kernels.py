"""Hot numeric loops.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with identical semantics. Which one the package uses is decided once
at import time::

    ROBUST_PERSUASION_NUMBA=0   # force the numpy path

The numba path is also skipped when numba is not importable. Both variants
stay reachable through ``NUMPY_KERNELS`` / ``NUMBA_KERNELS`` so tests and
``benchmarks/bench_kernels.py`` can compare them directly.
"""

from __future__ import annotations

import itertools
import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _numba_requested() -> bool:
    flag = os.environ.get("ROBUST_PERSUASION_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and _numba_requested()

# simplex status codes
SIMPLEX_OPTIMAL = 0
SIMPLEX_INFEASIBLE = 1
SIMPLEX_UNBOUNDED = 2
SIMPLEX_ITERATION_LIMIT = 3


# ---------------------------------------------------------------------------
# posterior evaluation: best response, delta-BR mask, sender-worst action
# ---------------------------------------------------------------------------

def _evaluate_posteriors_np(mus, sender, receiver, offset, tie_eps):
    """Row-wise (best, worst, worst value, BR mask) for a batch of posteriors.

    An action is in the BR set iff ``r(mu, a) > max_a' r(mu, a') - offset``;
    the best response is the lowest index within ``tie_eps`` of the maximum.
    """
    R = mus @ receiver
    S = mus @ sender
    rows = np.arange(R.shape[0])
    rmax = R.max(axis=1)
    best = np.argmax(R >= (rmax - tie_eps)[:, None], axis=1)
    mask = R > (rmax - offset)[:, None]
    mask[rows, best] = True
    masked = np.where(mask, S, np.inf)
    worst = np.argmin(masked, axis=1)
    return best, worst, masked[rows, worst], mask


def _evaluate_posteriors_py(mus, sender, receiver, offset, tie_eps):
    B = mus.shape[0]
    n = sender.shape[1]
    R = np.dot(mus, receiver)
    S = np.dot(mus, sender)
    best = np.empty(B, np.int64)
    worst = np.empty(B, np.int64)
    worst_val = np.empty(B)
    mask = np.zeros((B, n), np.bool_)
    for b in range(B):
        rmax = R[b, 0]
        for a in range(1, n):
            if R[b, a] > rmax:
                rmax = R[b, a]
        bi = 0
        for a in range(n):
            if R[b, a] >= rmax - tie_eps:
                bi = a
                break
        best[b] = bi
        wi = -1
        wv = np.inf
        for a in range(n):
            inside = R[b, a] > rmax - offset or a == bi
            mask[b, a] = inside
            if inside and S[b, a] < wv:
                wv = S[b, a]
                wi = a
        worst[b] = wi
        worst_val[b] = wv
    return best, worst, worst_val, mask


# ---------------------------------------------------------------------------
# compositions of k into m nonnegative parts, lexicographic order
# ---------------------------------------------------------------------------

def composition_count(m: int, k: int) -> int:
    return math.comb(k + m - 1, m - 1)


def _compositions_np(m, k):
    if m == 1:
        return np.array([[k]], dtype=np.int64)
    blocks = []
    for first in range(k + 1):
        tail = _compositions_np(m - 1, k - first)
        head = np.full((tail.shape[0], 1), first, dtype=np.int64)
        blocks.append(np.hstack([head, tail]))
    return np.vstack(blocks)


def _compositions_py(m, k, count):
    out = np.zeros((count, m), np.int64)
    cur = np.zeros(m, np.int64)
    cur[m - 1] = k
    for idx in range(count):
        out[idx, :] = cur
        # advance: rightmost position (not last) with mass to its right
        i = m - 2
        right = cur[m - 1]
        while i >= 0 and right == 0:
            right += cur[i]
            i -= 1
        if i < 0:
            break
        cur[i] += 1
        used = 0
        for t in range(i + 1):
            used += cur[t]
        for t in range(i + 1, m - 1):
            cur[t] = 0
        cur[m - 1] = k - used
    return out


# ---------------------------------------------------------------------------
# best Bayes-plausible split over <= max_size grid points
# ---------------------------------------------------------------------------

def _solve_small(G, h, j, tol):
    """Gaussian elimination on the leading j x j block; returns (ok, x)."""
    M = np.empty((j, j + 1))
    for r in range(j):
        for c in range(j):
            M[r, c] = G[r, c]
        M[r, j] = h[r]
    for col in range(j):
        piv = col
        big = abs(M[col, col])
        for r in range(col + 1, j):
            if abs(M[r, col]) > big:
                big = abs(M[r, col])
                piv = r
        if big <= tol:
            return False, np.zeros(j)
        if piv != col:
            for c in range(j + 1):
                tmp = M[col, c]
                M[col, c] = M[piv, c]
                M[piv, c] = tmp
        for r in range(col + 1, j):
            f = M[r, col] / M[col, col]
            for c in range(col, j + 1):
                M[r, c] -= f * M[col, c]
    x = np.zeros(j)
    for r in range(j - 1, -1, -1):
        acc = M[r, j]
        for c in range(r + 1, j):
            acc -= M[r, c] * x[c]
        x[r] = acc / M[r, r]
    return True, x


def _split_weights_py(points, idx, j, mu0, tol):
    """Unique weights p (sum 1) with sum_i p_i points[idx_i] = mu0, if any."""
    m = points.shape[1]
    w = np.zeros(j)
    if j == 1:
        for o in range(m):
            if abs(points[idx[0], o] - mu0[o]) > tol:
                return False, w
        w[0] = 1.0
        return True, w
    # affine coordinates relative to the last point
    last = idx[j - 1]
    d = j - 1
    G = np.zeros((d, d))
    h = np.zeros(d)
    for a in range(d):
        for b in range(d):
            acc = 0.0
            for o in range(m):
                acc += (points[idx[a], o] - points[last, o]) * (points[idx[b], o] - points[last, o])
            G[a, b] = acc
        acc = 0.0
        for o in range(m):
            acc += (points[idx[a], o] - points[last, o]) * (mu0[o] - points[last, o])
        h[a] = acc
    ok, x = _solve_small(G, h, d, 1e-14)
    if not ok:
        return False, w
    tot = 0.0
    for a in range(d):
        if x[a] < -tol:
            return False, w
        w[a] = x[a]
        tot += x[a]
    w[d] = 1.0 - tot
    if w[d] < -tol:
        return False, w
    for o in range(m):
        acc = 0.0
        for a in range(j):
            acc += w[a] * points[idx[a], o]
        if abs(acc - mu0[o]) > tol:
            return False, w
    for a in range(j):
        if w[a] < 0.0:
            w[a] = 0.0
    return True, w


def _best_split_py(points, fvals, mu0, max_size, tol):
    N = points.shape[0]
    m = points.shape[1]
    best_val = -np.inf
    best_idx = -np.ones(max_size, np.int64)
    best_w = np.zeros(max_size)
    idx = np.zeros(max_size, np.int64)
    for j in range(1, max_size + 1):
        if j > N:
            break
        for t in range(j):
            idx[t] = t
        while True:
            fmax = -np.inf
            for t in range(j):
                if fvals[idx[t]] > fmax:
                    fmax = fvals[idx[t]]
            if fmax > best_val:
                # coordinate box filter: mu0 must sit between the points
                inside = True
                for o in range(m):
                    lo = np.inf
                    hi = -np.inf
                    for t in range(j):
                        v = points[idx[t], o]
                        if v < lo:
                            lo = v
                        if v > hi:
                            hi = v
                    if mu0[o] < lo - tol or mu0[o] > hi + tol:
                        inside = False
                        break
                if inside:
                    ok, w = _split_weights_py(points, idx, j, mu0, tol)
                    if ok:
                        val = 0.0
                        for t in range(j):
                            val += w[t] * fvals[idx[t]]
                        if val > best_val:
                            best_val = val
                            for t in range(max_size):
                                best_idx[t] = -1
                                best_w[t] = 0.0
                            for t in range(j):
                                best_idx[t] = idx[t]
                                best_w[t] = w[t]
            # next combination
            pos = j - 1
            while pos >= 0 and idx[pos] == N - j + pos:
                pos -= 1
            if pos < 0:
                break
            idx[pos] += 1
            for t in range(pos + 1, j):
                idx[t] = idx[t - 1] + 1
    return best_val, best_idx, best_w


def _best_split_np(points, fvals, mu0, max_size, tol, chunk=200_000):
    N, m = points.shape
    best_val = -np.inf
    best_idx = -np.ones(max_size, np.int64)
    best_w = np.zeros(max_size)
    for j in range(1, min(max_size, N) + 1):
        combos = itertools.combinations(range(N), j)
        while True:
            block = np.fromiter(
                itertools.chain.from_iterable(itertools.islice(combos, chunk)), dtype=np.int64
            )
            if block.size == 0:
                break
            block = block.reshape(-1, j)
            P = points[block]  # C x j x m
            if j == 1:
                ok = np.all(np.abs(P[:, 0, :] - mu0) <= tol, axis=1)
                W = np.ones((block.shape[0], 1))
            else:
                D = P[:, :-1, :] - P[:, -1:, :]  # C x d x m
                G = D @ np.swapaxes(D, 1, 2)
                h = D @ (mu0 - P[:, -1, :])[:, :, None]
                det_ok = np.abs(np.linalg.det(G)) > 1e-14 ** (j - 1)
                x = np.zeros((block.shape[0], j - 1))
                if det_ok.any():
                    x[det_ok] = np.linalg.solve(G[det_ok], h[det_ok])[:, :, 0]
                W = np.hstack([x, 1.0 - x.sum(axis=1, keepdims=True)])
                recon = np.einsum("cj,cjm->cm", W, P)
                ok = det_ok & np.all(W >= -tol, axis=1) & np.all(np.abs(recon - mu0) <= tol, axis=1)
                W = np.clip(W, 0.0, None)
            if not ok.any():
                continue
            vals = np.where(ok, (W * fvals[block]).sum(axis=1), -np.inf)
            c = int(np.argmax(vals))
            if vals[c] > best_val:
                best_val = float(vals[c])
                best_idx[:] = -1
                best_w[:] = 0.0
                best_idx[:j] = block[c]
                best_w[:j] = W[c]
    return best_val, best_idx, best_w


# ---------------------------------------------------------------------------
# dense two-phase tableau simplex, Bland's rule
# ---------------------------------------------------------------------------

def _pivot(T, basis, row, col):
    T[row, :] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row:
            f = T[i, col]
            if f != 0.0:
                T[i, :] -= f * T[row, :]
    basis[row] = col


def _pivot_loop(T, basis, ncols, tol, max_iter):
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    for it in range(max_iter):
        enter = -1
        for j in range(ncols):
            if T[m, j] < -tol:
                enter = j
                break
        if enter < 0:
            return SIMPLEX_OPTIMAL, it
        leave = -1
        best_ratio = np.inf
        best_basis = 1 << 62
        for i in range(m):
            a = T[i, enter]
            if a > tol:
                ratio = T[i, rhs] / a
                if ratio < best_ratio - 1e-12:
                    best_ratio = ratio
                    best_basis = basis[i]
                    leave = i
                elif ratio <= best_ratio + 1e-12 and basis[i] < best_basis:
                    best_basis = basis[i]
                    leave = i
        if leave < 0:
            return SIMPLEX_UNBOUNDED, it
        _pivot(T, basis, leave, enter)
    return SIMPLEX_ITERATION_LIMIT, max_iter


def _simplex_py(A, b, c, tol, max_iter):
    """Minimize ``c @ x`` subject to ``A x = b``, ``x >= 0``; requires ``b >= 0``.

    Returns ``(status, x, iterations)``.
    """
    m, n = A.shape
    T = np.zeros((m + 1, n + m + 1))
    basis = np.empty(m, np.int64)
    for i in range(m):
        for j in range(n):
            T[i, j] = A[i, j]
        T[i, n + i] = 1.0
        T[i, n + m] = b[i]
        basis[i] = n + i
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += A[i, j]
        T[m, j] = -acc
    tot = 0.0
    for i in range(m):
        tot += b[i]
    T[m, n + m] = -tot

    x = np.zeros(n)
    status, it1 = _pivot_loop(T, basis, n + m, tol, max_iter)
    if status != SIMPLEX_OPTIMAL:
        return status, x, it1
    scale = 1.0
    for i in range(m):
        if b[i] > scale:
            scale = b[i]
    if -T[m, n + m] > 1e3 * tol * scale:
        return SIMPLEX_INFEASIBLE, x, it1

    for i in range(m):
        if basis[i] >= n:
            for j in range(n):
                if abs(T[i, j]) > tol:
                    _pivot(T, basis, i, j)
                    break

    for j in range(n + m + 1):
        T[m, j] = 0.0
    for j in range(n):
        T[m, j] = c[j]
    for i in range(m):
        bi = basis[i]
        if bi < n and c[bi] != 0.0:
            f = c[bi]
            for j in range(n + m + 1):
                T[m, j] -= f * T[i, j]

    status, it2 = _pivot_loop(T, basis, n, tol, max_iter)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, n + m]
    return status, x, it1 + it2


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _compositions_entry_py(m, k):
    return _compositions_py(m, k, composition_count(m, k))


NUMPY_KERNELS = {
    "evaluate_posteriors": _evaluate_posteriors_np,
    "compositions": _compositions_np,
    "best_split": _best_split_np,
    # the tableau simplex is inherently sequential; its "numpy" form is the
    # same pivoting code run by the interpreter
    "simplex": _simplex_py,
}

NUMBA_KERNELS: dict = {}

if HAVE_NUMBA:
    _opts = dict(cache=True, nogil=True)
    _pivot_nb = numba.njit(**_opts)(_pivot)
    _evaluate_nb = numba.njit(**_opts)(_evaluate_posteriors_py)
    _compositions_nb = numba.njit(**_opts)(_compositions_py)
    _solve_small_nb = numba.njit(**_opts)(_solve_small)

    # rebind helpers inside the jitted callers' globals
    def _rebind(fn, **names):
        g = dict(fn.__globals__)
        g.update(names)
        import types

        return types.FunctionType(fn.__code__, g, fn.__name__, fn.__defaults__, fn.__closure__)

    _split_weights_nb = numba.njit(**_opts)(_rebind(_split_weights_py, _solve_small=_solve_small_nb))
    _best_split_nb = numba.njit(**_opts)(_rebind(_best_split_py, _split_weights_py=_split_weights_nb))
    _pivot_loop_nb = numba.njit(**_opts)(_rebind(_pivot_loop, _pivot=_pivot_nb))
    _simplex_nb = numba.njit(**_opts)(
        _rebind(_simplex_py, _pivot=_pivot_nb, _pivot_loop=_pivot_loop_nb)
    )

    def _compositions_entry_nb(m, k):
        return _compositions_nb(m, k, composition_count(m, k))

    NUMBA_KERNELS = {
        "evaluate_posteriors": _evaluate_nb,
        "compositions": _compositions_entry_nb,
        "best_split": _best_split_nb,
        "simplex": _simplex_nb,
    }

_ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS


def evaluate_posteriors(mus, sender, receiver, offset, tie_eps):
    mus = np.ascontiguousarray(mus, dtype=np.float64)
    return _ACTIVE["evaluate_posteriors"](
        mus,
        np.ascontiguousarray(sender, dtype=np.float64),
        np.ascontiguousarray(receiver, dtype=np.float64),
        float(offset),
        float(tie_eps),
    )


def compositions(m: int, k: int) -> np.ndarray:
    if USE_NUMBA:
        return _ACTIVE["compositions"](int(m), int(k))
    return _compositions_np(int(m), int(k))


def best_split(points, fvals, mu0, max_size, tol=1e-9):
    return _ACTIVE["best_split"](
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(fvals, dtype=np.float64),
        np.ascontiguousarray(mu0, dtype=np.float64),
        int(max_size),
        float(tol),
    )


def simplex(A, b, c, tol=1e-9, max_iter=50_000):
    return _ACTIVE["simplex"](
        np.ascontiguousarray(A, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
        np.ascontiguousarray(c, dtype=np.float64),
        float(tol),
        int(max_iter),
    )
