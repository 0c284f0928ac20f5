"""
Carriers and arithmetic of the seven semirings.

Values travel through the evaluator as raw payloads (``bool``, ``int``,
``float`` and the ``math.inf`` sentinels); :class:`ScalarValue` tags a
payload with its ring for the public API. The per-ring properties live in
the ``_RINGS`` table.
"""

import math
import re
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple, TypedDict, Union

from .ir import MatlangError, SemiringId

Payload = Union[bool, int, float]

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

INF = math.inf


class EvaluationError(MatlangError):
    """Arithmetic failure, ring mismatch or resource limit during evaluation."""

    def __init__(self, message: str, cell: Optional[Tuple[int, int]] = None) -> None:
        self.cell = cell
        if cell is not None:
            message = f"{message} at cell ({cell[0]}, {cell[1]})"
        super().__init__(message)


class RingProperties(TypedDict):
    domain: str  # "B", "Z" or "R"
    kind: str  # "bool", "arith", "min" or "max"
    zero: Payload
    one: Payload


_RINGS: Dict[SemiringId, RingProperties] = {
    SemiringId.BOOL: {"domain": "B", "kind": "bool", "zero": False, "one": True},
    SemiringId.INT: {"domain": "Z", "kind": "arith", "zero": 0, "one": 1},
    SemiringId.REAL: {"domain": "R", "kind": "arith", "zero": 0.0, "one": 1.0},
    SemiringId.INT_MIN_PLUS: {"domain": "Z", "kind": "min", "zero": INF, "one": 0},
    SemiringId.REAL_MIN_PLUS: {"domain": "R", "kind": "min", "zero": INF, "one": 0.0},
    SemiringId.INT_MAX_PLUS: {"domain": "Z", "kind": "max", "zero": -INF, "one": 0},
    SemiringId.REAL_MAX_PLUS: {
        "domain": "R",
        "kind": "max",
        "zero": -INF,
        "one": 0.0,
    },
}


def ring_domain(ring: SemiringId) -> str:
    return _RINGS[ring]["domain"]


def ring_kind(ring: SemiringId) -> str:
    return _RINGS[ring]["kind"]


def _check_int(value: int) -> int:
    if not INT64_MIN <= value <= INT64_MAX:
        raise EvaluationError(f"integer overflow: {value} does not fit in 64 bits")
    return value


def _check_real(value: float, a: float, b: float) -> float:
    if value != value:
        raise EvaluationError(f"undefined result combining {a!r} and {b!r}")
    if math.isinf(value) and math.isfinite(a) and math.isfinite(b):
        raise EvaluationError(f"real overflow combining {a!r} and {b!r}")
    return value + 0.0


def _bool_add(a: Payload, b: Payload) -> Payload:
    return a or b


def _bool_mul(a: Payload, b: Payload) -> Payload:
    return a and b


def _int_add(a: Payload, b: Payload) -> Payload:
    return _check_int(a + b)


def _int_mul(a: Payload, b: Payload) -> Payload:
    return _check_int(a * b)


def _real_add(a: Payload, b: Payload) -> Payload:
    return _check_real(a + b, a, b)


def _real_mul(a: Payload, b: Payload) -> Payload:
    # zero absorbs, also against the infinities of encoded values
    if a == 0.0 or b == 0.0:
        return 0.0
    return _check_real(a * b, a, b)


def _tropical_mul(zero: float, is_int: bool) -> Callable[[Payload, Payload], Payload]:
    def mul(a: Payload, b: Payload) -> Payload:
        if a == zero or b == zero:
            return zero
        if is_int:
            return _check_int(a + b)
        return _check_real(a + b, a, b)

    return mul


class Semiring:
    """Raw-payload operations of one ring."""

    __slots__ = ("id", "domain", "kind", "zero", "one", "add", "mul")

    def __init__(self, ring: SemiringId) -> None:
        props = _RINGS[ring]
        self.id = ring
        self.domain = props["domain"]
        self.kind = props["kind"]
        self.zero = props["zero"]
        self.one = props["one"]
        add: Callable[[Payload, Payload], Payload]
        mul: Callable[[Payload, Payload], Payload]
        if self.kind == "bool":
            add, mul = _bool_add, _bool_mul
        elif self.kind == "arith":
            add, mul = (_int_add, _int_mul) if self.domain == "Z" else (_real_add, _real_mul)
        elif self.kind == "min":
            add, mul = min, _tropical_mul(INF, self.domain == "Z")
        else:
            add, mul = max, _tropical_mul(-INF, self.domain == "Z")
        self.add = add
        self.mul = mul

    def __repr__(self) -> str:
        return f"Semiring({self.id})"

    def contains(self, payload: object) -> bool:
        """Whether ``payload`` lies in the carrier (after normalization)."""
        return _in_carrier(self.id, payload)

    def is_zero(self, payload: Payload) -> bool:
        return payload == self.zero


_SEMIRINGS = {ring: Semiring(ring) for ring in SemiringId}


def get_semiring(ring: SemiringId) -> Semiring:
    return _SEMIRINGS[ring]


def _in_carrier(ring: SemiringId, payload: object, encoded: bool = False) -> bool:
    props = _RINGS[ring]
    if props["domain"] == "B":
        return isinstance(payload, bool)
    if isinstance(payload, bool):
        return False
    if props["domain"] == "Z":
        if isinstance(payload, int):
            return INT64_MIN <= payload <= INT64_MAX
        return (
            isinstance(payload, float)
            and math.isinf(payload)
            and payload == props["zero"]
        )
    if not isinstance(payload, float) or payload != payload:
        return False
    if math.isfinite(payload):
        return True
    return encoded or payload == props["zero"]


def normalize(ring: SemiringId, payload: Payload) -> Payload:
    """Bring ``payload`` to the representation used for ``ring``.

    Integers are widened for real rings and ``-0.0`` becomes ``0.0``.
    """
    domain = _RINGS[ring]["domain"]
    if domain == "R" and isinstance(payload, int) and not isinstance(payload, bool):
        return float(payload)
    if isinstance(payload, float):
        return payload + 0.0
    return payload


@dataclass(frozen=True, eq=False)
class ScalarValue:
    """A payload tagged with the ring it belongs to."""

    ring: SemiringId
    payload: Payload

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScalarValue):
            return NotImplemented
        return self.ring is other.ring and self.payload == other.payload

    def __hash__(self) -> int:
        return hash((self.ring, self.payload))

    def __post_init__(self) -> None:
        payload = normalize(self.ring, self.payload)
        object.__setattr__(self, "payload", payload)
        if not _in_carrier(self.ring, payload, encoded=self._encoded):
            raise ValueError(f"{payload!r} is not in the carrier of {self.ring}")

    _encoded = False

    def __str__(self) -> str:
        return f"{self.ring}({format_token(self.ring, self.payload)})"


@dataclass(frozen=True, eq=False)
class EncodedValue(ScalarValue):
    """A real value that may also be one of the encoding sentinels ``±inf``."""

    _encoded = True

    def __post_init__(self) -> None:
        if self.ring is not SemiringId.REAL:
            raise ValueError("encoded values are real")
        super().__post_init__()


def zero(r: SemiringId) -> ScalarValue:
    return ScalarValue(r, _RINGS[r]["zero"])


def one(r: SemiringId) -> ScalarValue:
    return ScalarValue(r, _RINGS[r]["one"])


def _same_ring(a: ScalarValue, b: ScalarValue, op: str) -> SemiringId:
    if a.ring is not b.ring:
        raise EvaluationError(f"{op} of {a.ring} and {b.ring} values")
    return a.ring


def _wrap(ring: SemiringId, payload: Payload) -> ScalarValue:
    if ring is SemiringId.REAL and isinstance(payload, float) and math.isinf(payload):
        return EncodedValue(ring, payload)
    return ScalarValue(ring, payload)


def sr_add(a: ScalarValue, b: ScalarValue) -> ScalarValue:
    ring = _same_ring(a, b, "addition")
    return _wrap(ring, _SEMIRINGS[ring].add(a.payload, b.payload))


def sr_mul(a: ScalarValue, b: ScalarValue) -> ScalarValue:
    ring = _same_ring(a, b, "multiplication")
    return _wrap(ring, _SEMIRINGS[ring].mul(a.payload, b.payload))


def sub_payload(ring: SemiringId, a: Payload, b: Payload) -> Payload:
    if ring is SemiringId.INT:
        return _check_int(a - b)
    if ring is SemiringId.REAL:
        return _check_real(a - b, a, b)
    raise EvaluationError(f"subtraction is not defined over {ring}")


def div_payload(ring: SemiringId, a: Payload, b: Payload) -> Payload:
    if ring is not SemiringId.REAL:
        raise EvaluationError(f"division is not defined over {ring}")
    if b == 0.0:
        raise EvaluationError("division by zero")
    return _check_real(a / b, a, b)


def sr_sub(a: ScalarValue, b: ScalarValue) -> ScalarValue:
    """
    >>> sr_sub(ScalarValue(SemiringId.INT, 1), ScalarValue(SemiringId.INT, 1)).payload
    0
    """
    ring = _same_ring(a, b, "subtraction")
    return _wrap(ring, sub_payload(ring, a.payload, b.payload))


def sr_div(a: ScalarValue, b: ScalarValue) -> ScalarValue:
    ring = _same_ring(a, b, "division")
    return _wrap(ring, div_payload(ring, a.payload, b.payload))


def sr_eq(a: ScalarValue, b: ScalarValue) -> ScalarValue:
    _same_ring(a, b, "comparison")
    return ScalarValue(SemiringId.BOOL, a.payload == b.payload)


def cast_payload(src: SemiringId, dst: SemiringId, p: Payload) -> Payload:
    if src is dst:
        return p
    source, target = _RINGS[src], _RINGS[dst]
    if p == source["zero"]:
        return target["zero"]
    if target["domain"] == "B":
        return True
    if source["domain"] == "B":
        return target["one"]
    if source["domain"] == target["domain"]:
        return p
    if target["domain"] == "R":
        return float(p)
    # reals beyond the 64-bit range saturate
    if p >= INT64_MAX:
        return INT64_MAX
    if p <= INT64_MIN:
        return INT64_MIN
    return math.floor(p)


def cast_value(src: SemiringId, dst: SemiringId, v: ScalarValue) -> ScalarValue:
    """Cast ``v`` from ``src`` to ``dst``, preserving the additive identity.

    The cast is total: reals outside the 64-bit range floor to the nearest
    bound when cast to an integer ring.

    >>> cast_value(SemiringId.REAL, SemiringId.INT, ScalarValue(SemiringId.REAL, 2.7))
    ScalarValue(ring=<SemiringId.INT: 'int'>, payload=2)
    """
    if v.ring is not src:
        raise ValueError(f"cannot cast a {v.ring} value as {src}")
    return ScalarValue(dst, cast_payload(src, dst, v.payload))


def enc_payload(r: SemiringId, p: Payload) -> float:
    kind = _RINGS[r]["kind"]
    if kind == "bool":
        return 1.0 if p else 0.0
    if kind == "min":
        if p == INF:
            return 0.0
        return INF if p == 0 else float(p)
    if kind == "max":
        if p == -INF:
            return 0.0
        return -INF if p == 0 else float(p)
    return float(p)


def dec_payload(r: SemiringId, w: float) -> Payload:
    props = _RINGS[r]
    kind, zero_, one_ = props["kind"], props["zero"], props["one"]
    if kind == "bool":
        return w == 1.0
    if kind in ("min", "max"):
        if w == 0.0:
            return zero_
        if w == (INF if kind == "min" else -INF):
            return one_
    if not math.isfinite(w):
        return zero_
    if props["domain"] == "Z":
        if not w.is_integer() or not INT64_MIN <= w <= INT64_MAX:
            return zero_
        return int(w)
    return w + 0.0


def enc_value(r: SemiringId, v: ScalarValue) -> EncodedValue:
    """Injective, zero-preserving embedding of ``r`` into encoded reals.

    >>> enc_value(SemiringId.INT_MIN_PLUS, ScalarValue(SemiringId.INT_MIN_PLUS, 0)).payload
    inf
    """
    if v.ring is not r:
        raise ValueError(f"cannot encode a {v.ring} value as {r}")
    return EncodedValue(SemiringId.REAL, enc_payload(r, v.payload))


def dec_value(r: SemiringId, w: ScalarValue) -> ScalarValue:
    """Left inverse of :func:`enc_value`; values off its image decode to zero."""
    if w.ring is not SemiringId.REAL:
        raise ValueError(f"cannot decode a {w.ring} value")
    return ScalarValue(r, dec_payload(r, float(w.payload)))


# Value tokens, shared by program literals and matrix files.

_INTEGER = re.compile(r"[+-]?\d+\Z")
_DECIMAL = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?\Z")


def parse_token(ring: SemiringId, token: str) -> Payload:
    """Parse a value token in the carrier of ``ring``.

    >>> parse_token(SemiringId.INT_MIN_PLUS, "inf")
    inf
    >>> parse_token(SemiringId.REAL, "2")
    2.0
    """
    props = _RINGS[ring]
    if props["domain"] == "B":
        if token in ("true", "false"):
            return token == "true"
        raise ValueError(f"{token!r} is not a {ring} value")
    if token in ("inf", "-inf"):
        payload: Payload = INF if token == "inf" else -INF
        if payload != props["zero"]:
            raise ValueError(f"{token!r} is not in the carrier of {ring}")
        return payload
    if props["domain"] == "Z":
        if not _INTEGER.match(token):
            raise ValueError(f"{token!r} is not a {ring} value")
        value = int(token)
        if not INT64_MIN <= value <= INT64_MAX:
            raise ValueError(f"{token!r} does not fit in 64 bits")
        return value
    if not _DECIMAL.match(token):
        raise ValueError(f"{token!r} is not a {ring} value")
    real = float(token)
    if not math.isfinite(real):
        raise ValueError(f"{token!r} is out of range for {ring}")
    return real + 0.0


def format_token(ring: SemiringId, payload: Payload) -> str:
    """Canonical token for ``payload``; reals use the shortest round-trip form."""
    if isinstance(payload, bool):
        return "true" if payload else "false"
    if isinstance(payload, float):
        if math.isinf(payload):
            return "inf" if payload > 0 else "-inf"
        if _RINGS[ring]["domain"] == "Z":
            return str(int(payload))
        return repr(payload + 0.0)
    return str(payload)
