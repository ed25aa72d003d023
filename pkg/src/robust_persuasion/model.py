"""Domain types and evaluation semantics of robust persuasion.

A receiver facing posterior ``mu`` may play any action in the delta-best
response set

    BR_delta(mu) = {a : r(mu, a) > r(mu, a*) - delta},

and the sender is scored against the worst such action, signal by signal.

Floating-point evaluation treats a utility gap within ``BOUNDARY_TOL`` of
delta as lying exactly on the boundary (and hence outside the set, since the
inequality is strict). LP optima sit exactly on these boundaries, so without
the snap the sign of a rounding error would decide the receiver's response.
Passing ``exact=True`` evaluates in rational arithmetic instead, with no
tolerance at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, InvalidInstance, InvalidScheme, MissingResponse, Violation

BOUNDARY_TOL = 1e-9
# receiver values closer than this count as tied for the best response
TIE_EPS = 1e-12
PRIOR_TOL = 1e-12
ROW_TOL = 1e-12
# denominators recovered when rationalizing float data
RATIONAL_DENOMINATOR = 10**6


def _readonly(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class RationalData(NamedTuple):
    prior: tuple[Fraction, ...]
    sender: tuple[tuple[Fraction, ...], ...]
    receiver: tuple[tuple[Fraction, ...], ...]
    delta: Fraction


@dataclass(frozen=True, eq=False)
class PersuasionInstance:
    """States, actions, common prior, utility matrices (rows = states) and delta.

    ``exact`` optionally carries the same data as exact rationals; generators
    fill it in so rational evaluation does not depend on float recovery.
    """

    states: tuple[str, ...]
    actions: tuple[str, ...]
    prior: np.ndarray
    sender_utility: np.ndarray
    receiver_utility: np.ndarray
    delta: float
    exact: RationalData | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        object.__setattr__(self, "actions", tuple(str(a) for a in self.actions))
        object.__setattr__(self, "prior", _readonly(self.prior, 1))
        object.__setattr__(self, "sender_utility", _readonly(self.sender_utility, 2))
        object.__setattr__(self, "receiver_utility", _readonly(self.receiver_utility, 2))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def m(self) -> int:
        return len(self.states)

    @property
    def n(self) -> int:
        return len(self.actions)

    def with_delta(self, delta: float) -> "PersuasionInstance":
        exact = self.exact
        if exact is not None:
            exact = exact._replace(delta=_to_fraction(delta))
        return replace(self, delta=float(delta), exact=exact)

    def __eq__(self, other):
        if not isinstance(other, PersuasionInstance):
            return NotImplemented
        return (
            self.states == other.states
            and self.actions == other.actions
            and self.delta == other.delta
            and np.array_equal(self.prior, other.prior)
            and np.array_equal(self.sender_utility, other.sender_utility)
            and np.array_equal(self.receiver_utility, other.receiver_utility)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SignalingScheme:
    """Conditional signal distributions; ``conditionals[w, j] = phi(w, sigma_j)``."""

    signal_labels: tuple[str, ...]
    conditionals: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "signal_labels", tuple(str(s) for s in self.signal_labels))
        object.__setattr__(self, "conditionals", _readonly(self.conditionals, 2))
        if self.conditionals.shape[1] != len(self.signal_labels):
            raise DimensionMismatch(
                f"{len(self.signal_labels)} labels for {self.conditionals.shape[1]} signal columns"
            )
        if len(set(self.signal_labels)) != len(self.signal_labels):
            raise InvalidScheme("signal labels must be unique")

    @property
    def num_signals(self) -> int:
        return len(self.signal_labels)

    def __eq__(self, other):
        if not isinstance(other, SignalingScheme):
            return NotImplemented
        return self.signal_labels == other.signal_labels and np.array_equal(
            self.conditionals, other.conditionals
        )

    __hash__ = None


@dataclass(frozen=True)
class Posterior:
    distribution: np.ndarray | None
    marginal: float

    @property
    def defined(self) -> bool:
        return self.distribution is not None


@dataclass(frozen=True)
class SubsetActionTuple:
    """A candidate delta-BR set together with the best response inside it."""

    br_set: frozenset[int]
    best: int

    def __post_init__(self):
        object.__setattr__(self, "br_set", frozenset(int(a) for a in self.br_set))
        object.__setattr__(self, "best", int(self.best))
        if not self.br_set:
            raise ValueError("br_set must be nonempty")
        if self.best not in self.br_set:
            raise ValueError(f"best action {self.best} not in br_set {sorted(self.br_set)}")

    @classmethod
    def from_mask(cls, mask: int, best: int) -> "SubsetActionTuple":
        return cls(frozenset(i for i in range(mask.bit_length()) if mask >> i & 1), best)

    @property
    def mask(self) -> int:
        return sum(1 << a for a in self.br_set)

    @property
    def key(self) -> tuple[int, int]:
        return (self.mask, self.best)

    def label(self, actions: Sequence[str] | None = None) -> str:
        names = [actions[a] if actions else f"a{a}" for a in sorted(self.br_set)]
        best = actions[self.best] if actions else f"a{self.best}"
        return "{" + ",".join(names) + "}->" + best


@dataclass(frozen=True)
class ReceiverStrategy:
    responses: Mapping[str, int]


class RobustValue(NamedTuple):
    value: float | Fraction
    worst_actions: dict[str, int]


@dataclass(frozen=True)
class SignalEvaluation:
    label: str
    marginal: float | Fraction
    posterior: np.ndarray | tuple[Fraction, ...] | None
    br_set: frozenset[int]
    best: int
    worst: int
    worst_value: float | Fraction


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def validate_instance(instance: PersuasionInstance) -> PersuasionInstance:
    """Return ``instance`` unchanged, or raise ``InvalidInstance`` listing every violation."""
    bad: list[Violation] = []
    m, n = instance.m, instance.n
    if m < 1 or n < 1:
        bad.append(Violation("DimensionMismatch", f"need m, n >= 1 (got m={m}, n={n})"))
    if instance.prior.shape != (m,):
        bad.append(Violation("DimensionMismatch", f"prior has shape {instance.prior.shape}, expected ({m},)"))
    for name in ("sender_utility", "receiver_utility"):
        mat = getattr(instance, name)
        if mat.shape != (m, n):
            bad.append(Violation("DimensionMismatch", f"{name} has shape {mat.shape}, expected ({m}, {n})"))
        elif not np.all(np.isfinite(mat)) or mat.min(initial=0.0) < 0.0 or mat.max(initial=0.0) > 1.0:
            bad.append(Violation("UtilityOutOfRange", f"{name} entries must lie in [0, 1]"))
    prior = instance.prior
    if not np.all(np.isfinite(prior)):
        bad.append(Violation("UnnormalizedPrior", "prior has non-finite entries"))
    else:
        if prior.size and prior.min() < 0.0:
            bad.append(Violation("NegativeProbability", f"prior entry {prior.min()} < 0"))
        if abs(prior.sum() - 1.0) > PRIOR_TOL:
            bad.append(Violation("UnnormalizedPrior", f"prior sums to {prior.sum()!r}"))
    if not np.isfinite(instance.delta) or instance.delta <= 0.0:
        bad.append(Violation("NonpositiveDelta", f"delta must be > 0 (got {instance.delta})"))
    if bad:
        raise InvalidInstance(bad)
    return instance


def validate_scheme(scheme: SignalingScheme, m: int | None = None) -> SignalingScheme:
    phi = scheme.conditionals
    if m is not None and phi.shape[0] != m:
        raise DimensionMismatch(f"scheme has {phi.shape[0]} state rows, instance has {m}")
    if phi.size and (not np.all(np.isfinite(phi)) or phi.min() < 0.0):
        raise InvalidScheme("conditional probabilities must be finite and nonnegative")
    sums = phi.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > ROW_TOL):
        worst = int(np.argmax(np.abs(sums - 1.0)))
        raise InvalidScheme(f"row {worst} sums to {sums[worst]!r}")
    return scheme


# ---------------------------------------------------------------------------
# elementary semantics
# ---------------------------------------------------------------------------

def _check_dims(instance: PersuasionInstance, scheme: SignalingScheme) -> None:
    if scheme.conditionals.shape[0] != instance.m:
        raise DimensionMismatch(
            f"scheme has {scheme.conditionals.shape[0]} state rows, instance has {instance.m}"
        )


def posterior(instance: PersuasionInstance, scheme: SignalingScheme, signal_index: int) -> Posterior:
    _check_dims(instance, scheme)
    joint = instance.prior * scheme.conditionals[:, signal_index]
    marginal = float(joint.sum())
    if marginal <= 0.0:
        return Posterior(None, 0.0)
    return Posterior(joint / marginal, marginal)


def posteriors(instance: PersuasionInstance, scheme: SignalingScheme) -> tuple[np.ndarray, np.ndarray]:
    """Marginals (length |Sigma|) and posteriors (|Sigma| x m, NaN rows where undefined)."""
    _check_dims(instance, scheme)
    joint = instance.prior[:, None] * scheme.conditionals
    marg = joint.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mus = (joint / marg).T
    mus[marg <= 0.0] = np.nan
    return marg, mus


def expected_utility(matrix, dist, action: int) -> float:
    return float(np.dot(np.asarray(dist, dtype=float), np.asarray(matrix, dtype=float)[:, action]))


def best_response(instance: PersuasionInstance, dist) -> int:
    """Receiver-optimal action; ties go to the lowest index."""
    vals = np.asarray(dist, dtype=float) @ instance.receiver_utility
    return int(np.argmax(vals >= vals.max() - TIE_EPS))


def _offset(delta: float, tie_tolerance: float) -> float:
    return delta + tie_tolerance - BOUNDARY_TOL


def br_delta_set(
    instance: PersuasionInstance, dist, tie_tolerance: float = 0.0, *, exact: bool = False
) -> frozenset[int]:
    """Actions strictly within delta of the best receiver value at ``dist``.

    ``tie_tolerance`` widens the set to ``r(a) > r* - delta - tie_tolerance``.
    The best response is always a member.
    """
    if exact:
        rat = rational_data(instance)
        mu = tuple(_to_fraction(x) for x in dist)
        vals = _rational_values(rat.receiver, mu)
        rstar = max(vals)
        thresh = rstar - rat.delta - _to_fraction(tie_tolerance)
        best = vals.index(rstar)
        return frozenset(a for a, v in enumerate(vals) if v > thresh or a == best)
    vals = np.asarray(dist, dtype=float) @ instance.receiver_utility
    best = int(np.argmax(vals >= vals.max() - TIE_EPS))
    members = set(np.flatnonzero(vals > vals.max() - _offset(instance.delta, tie_tolerance)).tolist())
    members.add(best)
    return frozenset(members)


# ---------------------------------------------------------------------------
# scheme evaluation
# ---------------------------------------------------------------------------

def evaluate_signals(
    instance: PersuasionInstance,
    scheme: SignalingScheme,
    tie_tolerance: float = 0.0,
    *,
    exact: bool = False,
) -> list[SignalEvaluation]:
    """Per-signal posterior, realized BR set, best response and sender-worst action.

    Zero-marginal signals are skipped.
    """
    if exact:
        return _evaluate_signals_exact(instance, scheme, tie_tolerance)
    marg, mus = posteriors(instance, scheme)
    live = np.flatnonzero(marg > 0.0)
    if live.size == 0:
        return []
    best, worst, wval, mask = _kernels.evaluate_posteriors(
        mus[live],
        instance.sender_utility,
        instance.receiver_utility,
        _offset(instance.delta, tie_tolerance),
        TIE_EPS,
    )
    out = []
    for row, j in enumerate(live):
        out.append(
            SignalEvaluation(
                label=scheme.signal_labels[j],
                marginal=float(marg[j]),
                posterior=mus[j],
                br_set=frozenset(np.flatnonzero(mask[row]).tolist()),
                best=int(best[row]),
                worst=int(worst[row]),
                worst_value=float(wval[row]),
            )
        )
    return out


def robust_utility(
    instance: PersuasionInstance,
    scheme: SignalingScheme,
    tie_tolerance: float = 0.0,
    *,
    exact: bool = False,
) -> RobustValue:
    """Sender utility against the worst delta-best-responding receiver.

    Returns the value and, per positive-probability signal, the witness
    worst action.
    """
    evals = evaluate_signals(instance, scheme, tie_tolerance, exact=exact)
    total = Fraction(0) if exact else 0.0
    for ev in evals:
        total += ev.marginal * ev.worst_value
    return RobustValue(total, {ev.label: ev.worst for ev in evals})


def strategy_utility(
    instance: PersuasionInstance,
    scheme: SignalingScheme,
    strategy: ReceiverStrategy,
    *,
    exact: bool = False,
) -> float | Fraction:
    """Expected sender utility when the receiver answers signal ``sigma`` with ``strategy[sigma]``."""
    _check_dims(instance, scheme)
    if exact:
        rat = rational_data(instance)
        phi = _rational_matrix(scheme.conditionals)
        total = Fraction(0)
        for j, label in enumerate(scheme.signal_labels):
            mass = sum((rat.prior[w] * phi[w][j] for w in range(instance.m)), Fraction(0))
            if mass == 0:
                continue
            a = _response(strategy, label)
            total += sum(rat.prior[w] * phi[w][j] * rat.sender[w][a] for w in range(instance.m))
        return total
    marg = instance.prior @ scheme.conditionals
    total = 0.0
    for j, label in enumerate(scheme.signal_labels):
        if marg[j] <= 0.0:
            continue
        a = _response(strategy, label)
        total += float(np.dot(instance.prior * scheme.conditionals[:, j], instance.sender_utility[:, a]))
    return total


def _response(strategy: ReceiverStrategy, label: str) -> int:
    try:
        return int(strategy.responses[label])
    except KeyError:
        raise MissingResponse(f"no response for signal {label!r}") from None


# ---------------------------------------------------------------------------
# rational arithmetic
# ---------------------------------------------------------------------------

def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(float(x)).limit_denominator(RATIONAL_DENOMINATOR)


def _exact_fraction(x) -> Fraction:
    """Exact binary value of a float (no denominator limiting)."""
    if isinstance(x, Fraction):
        return x
    return Fraction(float(x))


def _rational_matrix(a) -> tuple[tuple[Fraction, ...], ...]:
    # scheme entries are converted exactly so that 0/1 schemes stay 0/1 and
    # LP outputs are not silently rounded
    return tuple(tuple(_exact_fraction(x) for x in row) for row in np.asarray(a, dtype=float))


def rational_data(instance: PersuasionInstance) -> RationalData:
    """Exact rational copy of the instance data.

    Uses ``instance.exact`` when present; otherwise each float is replaced by
    the closest fraction with denominator at most ``RATIONAL_DENOMINATOR``.
    """
    if instance.exact is not None:
        return instance.exact
    return RationalData(
        prior=tuple(_to_fraction(x) for x in instance.prior),
        sender=tuple(tuple(_to_fraction(x) for x in row) for row in instance.sender_utility),
        receiver=tuple(tuple(_to_fraction(x) for x in row) for row in instance.receiver_utility),
        delta=_to_fraction(instance.delta),
    )


def _rational_values(matrix, mu) -> list[Fraction]:
    n = len(matrix[0])
    return [sum((mu[w] * matrix[w][a] for w in range(len(mu))), Fraction(0)) for a in range(n)]


def _evaluate_signals_exact(instance, scheme, tie_tolerance) -> list[SignalEvaluation]:
    _check_dims(instance, scheme)
    rat = rational_data(instance)
    phi = _rational_matrix(scheme.conditionals)
    tie = _to_fraction(tie_tolerance)
    out = []
    for j, label in enumerate(scheme.signal_labels):
        joint = [rat.prior[w] * phi[w][j] for w in range(instance.m)]
        mass = sum(joint, Fraction(0))
        if mass == 0:
            continue
        mu = tuple(x / mass for x in joint)
        rvals = _rational_values(rat.receiver, mu)
        svals = _rational_values(rat.sender, mu)
        rstar = max(rvals)
        best = rvals.index(rstar)
        thresh = rstar - rat.delta - tie
        members = frozenset(a for a, v in enumerate(rvals) if v > thresh or a == best)
        worst = min(sorted(members), key=lambda a: svals[a])
        out.append(SignalEvaluation(label, mass, mu, members, best, worst, svals[worst]))
    return out
