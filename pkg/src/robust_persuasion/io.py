"""JSON (de)serialization of instances and schemes.

Instance files hold ``states``, ``actions``, ``prior``, ``sender_utility``,
``receiver_utility`` (rows are states) and ``delta``. Numbers may be JSON
numbers or rational strings such as ``"1/3"``. Emitted numbers use the
shortest decimal that reads back as the same double, so files round-trip
exactly (a 12-digit rounding of 1/3 already breaks the 1e-12 prior-sum
check). Instances built from rationals also get an ``exact`` block of
rational strings, which takes precedence on load.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DimensionMismatch, InvalidInstance, InvalidScheme, Violation
from .model import PersuasionInstance, RationalData, SignalingScheme, _to_fraction, validate_instance, validate_scheme

_INSTANCE_KEYS = ("states", "actions", "prior", "sender_utility", "receiver_utility", "delta")


def fmt(x: float) -> float:
    return float(x)


def _num(x) -> float:
    if isinstance(x, str):
        return float(Fraction(x.strip()))
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"expected a number, got {x!r}")
    return float(x)


def _read(source) -> dict:
    if isinstance(source, dict):
        return source
    with open(source) as fh:
        return json.load(fh)


def instance_from_dict(data: dict) -> PersuasionInstance:
    missing = [k for k in _INSTANCE_KEYS if k not in data]
    if missing:
        raise InvalidInstance([Violation("MissingField", f"instance JSON lacks {', '.join(missing)}")])
    try:
        prior = [_num(x) for x in data["prior"]]
        sender = [[_num(x) for x in row] for row in data["sender_utility"]]
        receiver = [[_num(x) for x in row] for row in data["receiver_utility"]]
        delta = _num(data["delta"])
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InvalidInstance([Violation("BadNumber", str(exc))]) from None
    if len({len(r) for r in sender + receiver}) > 1:
        raise InvalidInstance([Violation("DimensionMismatch", "utility rows have unequal lengths")])
    exact = None
    ex = data.get("exact")
    if ex is None and _has_strings(data):
        ex = data
    if ex is not None:
        exact = RationalData(
            tuple(_to_fraction(x) for x in ex["prior"]),
            tuple(tuple(_to_fraction(x) for x in row) for row in ex["sender_utility"]),
            tuple(tuple(_to_fraction(x) for x in row) for row in ex["receiver_utility"]),
            _to_fraction(ex["delta"]),
        )
    inst = PersuasionInstance(
        states=data["states"],
        actions=data["actions"],
        prior=prior,
        sender_utility=np.array(sender, dtype=float).reshape(len(sender), -1),
        receiver_utility=np.array(receiver, dtype=float).reshape(len(receiver), -1),
        delta=delta,
        exact=exact,
    )
    return validate_instance(inst)


def _has_strings(data: dict) -> bool:
    vals = list(data["prior"]) + [data["delta"]]
    for key in ("sender_utility", "receiver_utility"):
        for row in data[key]:
            vals.extend(row)
    return any(isinstance(v, str) for v in vals)


def load_instance(source) -> PersuasionInstance:
    return instance_from_dict(_read(source))


def instance_to_dict(instance: PersuasionInstance, exact: bool = True) -> dict[str, Any]:
    out: dict[str, Any] = {
        "states": list(instance.states),
        "actions": list(instance.actions),
        "prior": [fmt(x) for x in instance.prior],
        "sender_utility": [[fmt(x) for x in row] for row in instance.sender_utility],
        "receiver_utility": [[fmt(x) for x in row] for row in instance.receiver_utility],
        "delta": fmt(instance.delta),
    }
    if exact and instance.exact is not None:
        ex = instance.exact
        out["exact"] = {
            "prior": [str(x) for x in ex.prior],
            "sender_utility": [[str(x) for x in row] for row in ex.sender],
            "receiver_utility": [[str(x) for x in row] for row in ex.receiver],
            "delta": str(ex.delta),
        }
    return out


def scheme_from_dict(data: dict, m: int | None = None) -> SignalingScheme:
    if "signal_labels" not in data or "conditionals" not in data:
        raise InvalidScheme("scheme JSON needs signal_labels and conditionals")
    try:
        phi = np.array([[_num(x) for x in row] for row in data["conditionals"]], dtype=float)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InvalidScheme(str(exc)) from None
    if phi.ndim != 2:
        raise DimensionMismatch("conditionals must be a rectangular matrix (rows are states)")
    return validate_scheme(SignalingScheme(data["signal_labels"], phi), m)


def load_scheme(source, m: int | None = None) -> SignalingScheme:
    return scheme_from_dict(_read(source), m)


def scheme_to_dict(scheme: SignalingScheme) -> dict[str, Any]:
    return {
        "signal_labels": list(scheme.signal_labels),
        "conditionals": [[fmt(x) for x in row] for row in scheme.conditionals],
    }


def dump(obj: dict, path=None) -> str:
    text = json.dumps(obj, indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
