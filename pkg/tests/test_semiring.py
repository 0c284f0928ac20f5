import itertools
import math
import random
import unittest
from typing import Any, List

from pytest import mark, raises

from matlang.ir import SemiringId
from matlang.semiring import (
    INF,
    INT64_MAX,
    INT64_MIN,
    EncodedValue,
    EvaluationError,
    ScalarValue,
    cast_value,
    dec_value,
    enc_value,
    format_token,
    get_semiring,
    one,
    parse_token,
    sr_add,
    sr_div,
    sr_eq,
    sr_mul,
    sr_sub,
    zero,
)

B, Z, R = SemiringId.BOOL, SemiringId.INT, SemiringId.REAL
ZMIN, RMIN = SemiringId.INT_MIN_PLUS, SemiringId.REAL_MIN_PLUS
ZMAX, RMAX = SemiringId.INT_MAX_PLUS, SemiringId.REAL_MAX_PLUS


def v(ring: SemiringId, payload: Any) -> ScalarValue:
    return ScalarValue(ring, payload)


@mark.parametrize(
    "ring, zero_payload, one_payload",
    (
        (B, False, True),
        (Z, 0, 1),
        (R, 0.0, 1.0),
        (ZMIN, INF, 0),
        (RMIN, INF, 0.0),
        (ZMAX, -INF, 0),
        (RMAX, -INF, 0.0),
    ),
)
def test_identities(ring: SemiringId, zero_payload: Any, one_payload: Any) -> None:
    assert zero(ring).payload == zero_payload
    assert one(ring).payload == one_payload
    x = v(ring, one_payload)
    assert sr_add(zero(ring), x) == x
    assert sr_mul(one(ring), x) == x
    assert sr_mul(zero(ring), x) == zero(ring)


@mark.parametrize(
    "ring, a, b, total, product",
    (
        (B, True, False, True, False),
        (Z, 3, -4, -1, -12),
        (R, 1.5, 2.0, 3.5, 3.0),
        (ZMIN, 3, 4, 3, 7),
        (RMIN, 2.5, 1.0, 1.0, 3.5),
        (ZMAX, 3, 4, 4, 7),
        (RMAX, -1.0, 2.0, 2.0, 1.0),
    ),
)
def test_add_mul(ring: SemiringId, a: Any, b: Any, total: Any, product: Any) -> None:
    assert sr_add(v(ring, a), v(ring, b)).payload == total
    assert sr_mul(v(ring, a), v(ring, b)).payload == product


@mark.parametrize(
    "ring, payload",
    (
        (B, 1),
        (Z, True),
        (Z, 1.5),
        (Z, INF),
        (Z, INT64_MAX + 1),
        (ZMIN, -INF),
        (ZMAX, INF),
        (R, INF),
        (R, math.nan),
        (RMIN, -INF),
    ),
)
def test_outside_carrier(ring: SemiringId, payload: Any) -> None:
    with raises(ValueError):
        ScalarValue(ring, payload)


class SemiringTestCase(unittest.TestCase):
    def test_real_normalizes(self) -> None:
        self.assertEqual(v(R, 2).payload, 2.0)
        self.assertIsInstance(v(R, 2).payload, float)
        self.assertEqual(str(v(R, -0.0)), "real(0.0)")

    def test_values_compare_by_ring(self) -> None:
        self.assertNotEqual(v(Z, 0), v(ZMIN, 0))
        self.assertEqual(EncodedValue(R, 2.0), v(R, 2.0))
        self.assertEqual(len({EncodedValue(R, 2.0), v(R, 2.0)}), 1)

    def test_encoded_values_hold_infinities(self) -> None:
        self.assertEqual(EncodedValue(R, INF).payload, INF)
        self.assertEqual(EncodedValue(R, -INF).payload, -INF)
        with self.assertRaises(ValueError):
            EncodedValue(Z, 1)

    def test_int_overflow(self) -> None:
        with self.assertRaises(EvaluationError):
            sr_add(v(Z, INT64_MAX), v(Z, 1))
        with self.assertRaises(EvaluationError):
            sr_mul(v(ZMIN, INT64_MAX), v(ZMIN, 1))

    def test_real_overflow(self) -> None:
        with self.assertRaises(EvaluationError):
            sr_mul(v(R, 1e300), v(R, 1e300))

    def test_real_zero_absorbs_encoded_infinity(self) -> None:
        self.assertEqual(sr_mul(v(R, 0.0), EncodedValue(R, INF)).payload, 0.0)

    def test_ring_mismatch(self) -> None:
        with self.assertRaises(EvaluationError):
            sr_add(v(Z, 1), v(R, 1.0))

    def test_sub_div(self) -> None:
        self.assertEqual(sr_sub(v(Z, 2), v(Z, 5)).payload, -3)
        self.assertEqual(sr_div(v(R, 1.0), v(R, 4.0)).payload, 0.25)
        with self.assertRaises(EvaluationError):
            sr_div(v(R, 1.0), v(R, 0.0))
        with self.assertRaises(EvaluationError):
            sr_sub(v(ZMIN, 1), v(ZMIN, 0))
        with self.assertRaises(EvaluationError):
            sr_div(v(Z, 4), v(Z, 2))

    def test_eq(self) -> None:
        self.assertEqual(sr_eq(v(ZMIN, INF), v(ZMIN, INF)), v(B, True))
        self.assertEqual(sr_eq(v(Z, 1), v(Z, 2)), v(B, False))

    def test_semiring_object(self) -> None:
        sr = get_semiring(ZMAX)
        self.assertEqual(sr.domain, "Z")
        self.assertEqual(sr.kind, "max")
        self.assertTrue(sr.is_zero(-INF))
        self.assertTrue(sr.contains(5))
        self.assertFalse(sr.contains(INF))


@mark.parametrize(
    "src, dst, payload, expected",
    (
        (Z, B, 0, False),
        (Z, B, -3, True),
        (B, ZMIN, True, 0),
        (B, ZMIN, False, INF),
        (Z, ZMAX, 0, -INF),
        (Z, ZMAX, 7, 7),
        (ZMIN, Z, INF, 0),
        (R, Z, 2.7, 2),
        (R, Z, -2.5, -3),
        (Z, R, 3, 3.0),
        (RMIN, RMAX, INF, -INF),
        (RMIN, RMAX, 1.5, 1.5),
    ),
)
def test_cast(src: SemiringId, dst: SemiringId, payload: Any, expected: Any) -> None:
    result = cast_value(src, dst, v(src, payload))
    assert result.ring is dst
    assert result.payload == expected


@mark.parametrize(
    "ring, payload, encoded",
    (
        (B, False, 0.0),
        (B, True, 1.0),
        (Z, 0, 0.0),
        (Z, -4, -4.0),
        (R, 2.5, 2.5),
        (ZMIN, INF, 0.0),
        (ZMIN, 0, INF),
        (ZMIN, 3, 3.0),
        (RMIN, 0.0, INF),
        (ZMAX, -INF, 0.0),
        (ZMAX, 0, -INF),
        (RMAX, -2.0, -2.0),
    ),
)
def test_encoding(ring: SemiringId, payload: Any, encoded: float) -> None:
    w = enc_value(ring, v(ring, payload))
    assert w.ring is R
    assert w.payload == encoded
    assert dec_value(ring, w) == v(ring, payload)


@mark.parametrize(
    "ring, encoded",
    (
        (B, 0.5),
        (Z, 0.5),
        (Z, INF),
        (ZMIN, -INF),
        (ZMAX, INF),
        (ZMIN, 2.5),
    ),
)
def test_decoding_off_image_is_zero(ring: SemiringId, encoded: float) -> None:
    assert dec_value(ring, EncodedValue(R, encoded)) == zero(ring)


@mark.parametrize(
    "ring, token, payload",
    (
        (B, "true", True),
        (Z, "-12", -12),
        (Z, "+3", 3),
        (R, "1e-3", 0.001),
        (R, ".5", 0.5),
        (ZMIN, "inf", INF),
        (RMAX, "-inf", -INF),
    ),
)
def test_parse_token(ring: SemiringId, token: str, payload: Any) -> None:
    assert parse_token(ring, token) == payload


@mark.parametrize(
    "ring, token",
    (
        (B, "1"),
        (Z, "1.0"),
        (Z, "inf"),
        (ZMIN, "-inf"),
        (R, "inf"),
        (R, "1e999"),
        (Z, "99999999999999999999"),
        (R, "abc"),
    ),
)
def test_parse_token_rejects(ring: SemiringId, token: str) -> None:
    with raises(ValueError):
        parse_token(ring, token)


@mark.parametrize(
    "ring, payload, token",
    (
        (B, False, "false"),
        (Z, -7, "-7"),
        (R, 0.1, "0.1"),
        (R, 1e-7, "1e-07"),
        (ZMIN, INF, "inf"),
        (RMAX, -INF, "-inf"),
    ),
)
def test_format_token(ring: SemiringId, payload: Any, token: str) -> None:
    assert format_token(ring, payload) == token


def sample_payloads(ring: SemiringId, rng: random.Random, count: int) -> List[Any]:
    """The ring's zero and one followed by small random payloads.

    Values stay small and integral so that real arithmetic is exact.
    """
    sr = get_semiring(ring)
    if ring is B:
        return [False, True]
    draws = [rng.randint(-6, 6) for _ in range(count)]
    if sr.domain == "R":
        return [sr.zero, sr.one] + [float(x) for x in draws]
    return [sr.zero, sr.one] + draws


def triples(ring: SemiringId) -> List[Any]:
    if ring is B:
        return list(itertools.product((False, True), repeat=3))
    rng = random.Random(str(ring))
    pool = sample_payloads(ring, rng, 40)
    return [tuple(rng.choice(pool) for _ in range(3)) for _ in range(10**4)]


@mark.parametrize("ring", list(SemiringId))
def test_semiring_laws(ring: SemiringId) -> None:
    sr = get_semiring(ring)
    add, mul = sr.add, sr.mul
    for a, b, c in triples(ring):
        assert add(add(a, b), c) == add(a, add(b, c))
        assert mul(mul(a, b), c) == mul(a, mul(b, c))
        assert add(a, b) == add(b, a)
        assert mul(a, b) == mul(b, a)
        assert add(sr.zero, a) == a
        assert mul(sr.one, a) == a
        assert mul(sr.zero, a) == sr.zero
        assert mul(a, add(b, c)) == add(mul(a, b), mul(a, c))


@mark.parametrize("src, dst", list(itertools.product(SemiringId, repeat=2)))
def test_cast_keeps_zero(src: SemiringId, dst: SemiringId) -> None:
    assert cast_value(src, dst, zero(src)) == zero(dst)


@mark.parametrize("ring", list(SemiringId))
def test_cast_to_same_ring_is_identity(ring: SemiringId) -> None:
    for payload in sample_payloads(ring, random.Random(1), 50):
        assert cast_value(ring, ring, v(ring, payload)) == v(ring, payload)


@mark.parametrize("ring", list(SemiringId))
def test_encoding_is_a_retraction(ring: SemiringId) -> None:
    rng = random.Random(2)
    payloads = sample_payloads(ring, rng, 50)
    if ring is not B:
        wide = [rng.randint(-(10**9), 10**9) for _ in range(50)]
        payloads += [float(x) / 8 for x in wide] if get_semiring(ring).domain == "R" else wide
    assert enc_value(ring, zero(ring)).payload == 0.0
    for payload in payloads:
        x = v(ring, payload)
        assert dec_value(ring, enc_value(ring, x)) == x


@mark.parametrize(
    "payload, expected",
    (
        (1e300, INT64_MAX),
        (-1e300, INT64_MIN),
        (2.0**63, INT64_MAX),
        (-(2.0**63), INT64_MIN),
        (2.0**62 + 0.5, 2**62),
    ),
)
def test_real_to_int_cast_saturates(payload: float, expected: int) -> None:
    assert cast_value(R, Z, v(R, payload)).payload == expected
    assert cast_value(RMIN, ZMIN, v(RMIN, payload)).payload == expected
