"""Instance generators: worked examples, the subset-sum reduction, random draws."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BadSubsetSumInput, DeltaOutOfRange, NoWitness, SizeGuard
from .model import PersuasionInstance, RationalData, SignalingScheme, _to_fraction, validate_instance

MAX_WITNESS_N = 24


def _from_rational(states, actions, prior, sender, receiver, delta) -> PersuasionInstance:
    exact = RationalData(
        tuple(prior),
        tuple(tuple(row) for row in sender),
        tuple(tuple(row) for row in receiver),
        delta,
    )
    return PersuasionInstance(
        states=states,
        actions=actions,
        prior=[float(p) for p in prior],
        sender_utility=[[float(v) for v in row] for row in sender],
        receiver_utility=[[float(v) for v in row] for row in receiver],
        delta=float(delta),
        exact=exact,
    )


def apples_instance(delta=0.1) -> PersuasionInstance:
    """Seller and buyer of an apple that is good with probability 1/3.

    Buying pays the buyer +1 on a good apple and -1 on a bad one, passing pays
    0; these are mapped to [0, 1] by ``u -> (u + 1) / 2``. The seller gets 1
    whenever the buyer buys.
    """
    F = Fraction
    return _from_rational(
        ("good", "bad"),
        ("buy", "pass"),
        (F(1, 3), F(2, 3)),
        ((F(1), F(0)), (F(1), F(0))),
        ((F(1), F(1, 2)), (F(0), F(1, 2))),
        _to_fraction(delta),
    )


def direct_revelation_example(eps=0.01, delta=1) -> PersuasionInstance:
    """Three states where recommending actions loses half the optimum.

    Both players get 1 when the action index matches the state index and 0
    otherwise; the extra state ``w_bot`` (prior ``eps``) matches nothing.
    """
    e = _to_fraction(eps)
    if not 0 < e < 1:
        raise ValueError("eps must lie in (0, 1)")
    half = (1 - e) / 2
    util = ((Fraction(0), Fraction(0)), (Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)))
    return _from_rational(("w_bot", "w0", "w1"), ("a0", "a1"), (e, half, half), util, util, _to_fraction(delta))


# ---------------------------------------------------------------------------
# subset-sum reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubsetSumInput:
    values: tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if any(int(v) != v for v in self.values):
            raise BadSubsetSumInput("values must be integers")
        object.__setattr__(self, "values", vals)
        if len(vals) < 2 or len(vals) % 2:
            raise BadSubsetSumInput(f"need an even number (>= 2) of values, got {len(vals)}")
        if sum(vals) != 0:
            raise BadSubsetSumInput(f"values must sum to 0 (sum is {sum(vals)})")

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def M(self) -> int:
        return sum(abs(v) for v in self.values)


@dataclass(frozen=True)
class SubsetSumMetadata:
    """Bookkeeping for a reduction instance.

    The emitted receiver utilities and delta are the construction's values
    times ``receiver_scale``; ``delta`` here is the unscaled one.
    """

    M: int
    delta: Fraction
    receiver_scale: Fraction
    malicious: tuple[int, ...]
    benign: tuple[int, ...]
    sign: tuple[int, int]


def subset_sum_instance(data: SubsetSumInput, delta=0.25) -> tuple[PersuasionInstance, SubsetSumMetadata]:
    """Persuasion instance whose optimum reaches 1/2 iff ``data`` has a balanced zero-sum half.

    States ``w1..wn`` are equally likely. Actions: malicious guesses ``a_i``
    (worthless to the sender), benign guesses ``b_i``, and the sign-matching
    pair ``c+``/``c-`` whose payoffs tilt with ``x_j``.
    """
    if not isinstance(data, SubsetSumInput):
        data = SubsetSumInput(tuple(data))
    n = data.n
    if n < 4:
        raise BadSubsetSumInput("the construction needs n >= 4 (n = 2 divides by 1 - 2/n = 0)")
    M = data.M
    if M == 0:
        raise BadSubsetSumInput("all-zero input: M = sum |x| is 0")
    d = _to_fraction(delta)
    lim = 1 - Fraction(2, n)
    if not 0 < d < lim:
        raise DeltaOutOfRange(f"delta must lie in (0, {lim}) for n = {n}, got {delta}")
    one, zero = Fraction(1), Fraction(0)
    mal_off = max(1 - d / lim, zero)
    ben_off_s = (Fraction(1, 2) - Fraction(2, n)) / lim
    r_rows, s_rows = [], []
    for j in range(n):
        x = Fraction(data.values[j])
        r = [one if i == j else mal_off for i in range(n)]
        r += [one if i == j else 1 - d for i in range(n)]
        r += [1 + d / (4 * M) * x, 1 - d / (4 * M) * x]
        s = [zero] * n
        s += [one if i == j else ben_off_s for i in range(n)]
        s += [Fraction(1, 2) - x / (4 * M), Fraction(1, 2) + x / (4 * M)]
        r_rows.append([v / 2 for v in r])
        s_rows.append(s)
    states = tuple(f"w{j + 1}" for j in range(n))
    actions = tuple(f"a{i + 1}" for i in range(n)) + tuple(f"b{i + 1}" for i in range(n)) + ("c+", "c-")
    inst = _from_rational(states, actions, (Fraction(1, n),) * n, s_rows, r_rows, d / 2)
    validate_instance(inst)
    meta = SubsetSumMetadata(
        M=M,
        delta=d,
        receiver_scale=Fraction(1, 2),
        malicious=tuple(range(n)),
        benign=tuple(range(n, 2 * n)),
        sign=(2 * n, 2 * n + 1),
    )
    return inst, meta


def find_witness(data: SubsetSumInput) -> tuple[int, ...] | None:
    """Lexicographically first index set of size n/2 with zero sum, or None."""
    if not isinstance(data, SubsetSumInput):
        data = SubsetSumInput(tuple(data))
    if data.n > MAX_WITNESS_N:
        raise SizeGuard(f"exhaustive witness search capped at n = {MAX_WITNESS_N}")
    for J in itertools.combinations(range(data.n), data.n // 2):
        if sum(data.values[i] for i in J) == 0:
            return J
    return None


def yes_certificate_scheme(data: SubsetSumInput, metadata: SubsetSumMetadata | None = None, witness=None) -> SignalingScheme:
    """Deterministic two-signal scheme: ``sigma+`` on the witness states, ``sigma-`` elsewhere."""
    if not isinstance(data, SubsetSumInput):
        data = SubsetSumInput(tuple(data))
    J = tuple(witness) if witness is not None else find_witness(data)
    if J is None:
        raise NoWitness(f"{list(data.values)} has no zero-sum subset of size {data.n // 2}")
    if len(J) != data.n // 2 or sum(data.values[i] for i in J) != 0:
        raise NoWitness(f"{J} is not a balanced zero-sum index set")
    phi = np.zeros((data.n, 2))
    phi[list(J), 0] = 1.0
    phi[:, 1] = 1.0 - phi[:, 0]
    return SignalingScheme(("sigma+", "sigma-"), phi)


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------

def random_instance(m: int, n: int, delta=0.1, seed=None) -> PersuasionInstance:
    """Uniform prior; utilities drawn i.i.d. uniform on [0, 1] and rounded to 6 decimals."""
    if m < 1 or n < 1:
        raise ValueError("need m, n >= 1")
    rng = np.random.default_rng(seed)
    sender = np.round(rng.random((m, n)), 6)
    receiver = np.round(rng.random((m, n)), 6)
    return PersuasionInstance(
        states=tuple(f"w{i}" for i in range(m)),
        actions=tuple(f"a{i}" for i in range(n)),
        prior=np.full(m, 1.0 / m),
        sender_utility=sender,
        receiver_utility=receiver,
        delta=float(delta),
    )
