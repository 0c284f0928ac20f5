import unittest
from typing import Any

from pytest import mark, raises

from matlang.ir import (
    ONE,
    Add,
    Apply,
    Cast,
    Cond,
    Dec,
    Diag,
    Div,
    Enc,
    Eq,
    Expr,
    ForCanonical,
    ForCounted,
    Let,
    Lit,
    MatMul,
    MatrixType,
    Ones,
    Param,
    PickAny,
    PointwiseFn,
    ScalarExpr,
    Schema,
    SemiringId,
    SizeTerm,
    Sub,
    Transpose,
    Var,
)
from matlang.semiring import ScalarValue
from matlang.typecheck import (
    TypeCheckError,
    check_program,
    check_scalar,
    infer_type,
    loop_step_schema,
)

a, b = SizeTerm("a"), SizeTerm("b")
B, Z, R = SemiringId.BOOL, SemiringId.INT, SemiringId.REAL

SCHEMA = Schema(
    {
        "A": MatrixType(a, b, Z),
        "C": MatrixType(b, b, Z),
        "u": MatrixType(a, ONE, Z),
        "w": MatrixType(b, ONE, R),
    }
)


@mark.parametrize(
    "expr, expected",
    (
        (Var("A"), MatrixType(a, b, Z)),
        (Transpose(Var("A")), MatrixType(b, a, Z)),
        (Ones(Var("A")), MatrixType(a, ONE, Z)),
        (Diag(Var("u")), MatrixType(a, a, Z)),
        (MatMul(Var("A"), Var("C")), MatrixType(a, b, Z)),
        (PickAny(Var("C")), MatrixType(b, b, Z)),
        (Let("X", Transpose(Var("A")), MatMul(Var("A"), Var("X"))), MatrixType(a, a, Z)),
        (
            Apply(PointwiseFn((("c", Z),), Eq(Param("c"), Param("c"))), (Var("A"),)),
            MatrixType(a, b, B),
        ),
        (
            ForCounted(Var("u"), (("X", MatMul(Var("X"), Var("C"))),), (Var("A"),)),
            MatrixType(a, b, Z),
        ),
        (
            ForCanonical(
                "u",
                (("X", MatMul(Var("u"), Var("Y"))), ("Y", Var("Y"))),
                (MatMul(Var("u"), Transpose(Var("u"))), Transpose(Var("u"))),
            ),
            MatrixType(a, a, Z),
        ),
    ),
)
def test_infer_type(expr: Expr, expected: MatrixType) -> None:
    assert infer_type(SCHEMA, expr) == expected


@mark.parametrize(
    "expr, rule, path",
    (
        (Var("nope"), "var unbound", "$"),
        (MatMul(Var("A"), Var("A")), "matmul inner dims", "$"),
        (MatMul(Transpose(Var("w")), Var("C")), "matmul ring", "$"),
        (Diag(Var("A")), "diag vector", "$"),
        (
            Apply(PointwiseFn((("c", Z), ("d", Z)), Param("c")), (Var("A"), Var("C"))),
            "apply shape",
            "$.args[1]",
        ),
        (Apply(PointwiseFn((("c", R),), Param("c")), (Var("A"),)), "apply ring", "$.args[0]"),
        (Apply(PointwiseFn((("c", Z),), Param("c")), (Var("A"), Var("A"))), "apply arity", "$"),
        (
            ForCounted(Var("u"), (("X", Transpose(Var("X"))),), (Var("A"),)),
            "loop body/init",
            "$.bindings[0]",
        ),
        (ForCounted(Var("A"), (("X", Var("X")),), (Var("A"),)), "driver vector", "$.driver"),
        (ForCanonical("A", (("X", Var("X")),), (Var("A"),)), "canonical vector", "$"),
        (ForCanonical("u", (("X", Var("X")),), ()), "zero-init unbound", "$"),
        (Transpose(MatMul(Var("C"), Var("A"))), "matmul inner dims", "$.operand"),
    ),
)
def test_type_errors(expr: Expr, rule: str, path: str) -> None:
    with raises(TypeCheckError) as info:
        infer_type(SCHEMA, expr)
    assert info.value.rule == rule
    assert info.value.path == path


def lit(ring: SemiringId, payload: object) -> Lit:
    return Lit(ring, ScalarValue(ring, payload))  # type: ignore[arg-type]


ENV = {"i": Z, "r": R, "m": SemiringId.INT_MIN_PLUS}


@mark.parametrize(
    "se, ring",
    (
        (Add(Param("i"), lit(Z, 2)), Z),
        (Sub(Param("r"), Param("r")), R),
        (Div(Param("r"), lit(R, 2.0)), R),
        (Eq(Param("m"), Param("m")), B),
        (Cast(B, Param("m")), B),
        (Cond(Param("i"), lit(Z, 0), Param("r"), lit(R, 1.0)), R),
        (Enc(SemiringId.INT_MIN_PLUS, Param("m")), R),
        (Dec(Z, Param("r")), Z),
    ),
)
def test_check_scalar(se: ScalarExpr, ring: SemiringId) -> None:
    assert check_scalar(ENV, se) is ring


@mark.parametrize(
    "se, rule",
    (
        (Param("x"), "scalar param"),
        (Add(Param("i"), Param("r")), "add ring"),
        (Sub(Param("m"), Param("m")), "sub ring"),
        (Div(Param("i"), Param("i")), "div ring"),
        (Eq(Param("i"), Param("m")), "eq ring"),
        (Cond(Param("i"), Param("r"), Param("i"), Param("i")), "cond ring"),
        (Enc(Z, Param("r")), "enc ring"),
        (Dec(Z, Param("i")), "dec ring"),
    ),
)
def test_scalar_errors(se: ScalarExpr, rule: str) -> None:
    with raises(TypeCheckError) as info:
        check_scalar(ENV, se)
    assert info.value.rule == rule


class CheckProgramTestCase(unittest.TestCase):
    def test_message_names_path_and_types(self) -> None:
        with self.assertRaises(TypeCheckError) as info:
            infer_type(SCHEMA, Let("X", Var("A"), MatMul(Var("X"), Var("X"))))
        self.assertEqual(
            str(info.exception), "$.body: matmul inner dims: expected b, found a"
        )

    def test_loop_bodies_see_bindings(self) -> None:
        # Y is typed by its initializer when X's body reads it
        loop = ForCounted(
            Var("u"),
            (("X", MatMul(Var("Y"), Var("C"))), ("Y", Var("Y"))),
            (Var("A"), Var("A")),
        )
        self.assertEqual(infer_type(SCHEMA, loop), MatrixType(a, b, Z))

    def test_check_program(self) -> None:
        dialect, t = check_program(SCHEMA, MatMul(Transpose(Var("u")), Var("A")))
        self.assertEqual(str(dialect), "core")
        self.assertEqual(t, MatrixType(ONE, b, Z))

    def test_loop_step_schema(self) -> None:
        step = loop_step_schema(SCHEMA, (("X", Var("X")), ("A", Var("A"))), (Var("C"), Var("u")))
        self.assertEqual(step["X"], MatrixType(b, b, Z))
        self.assertEqual(step["A"], MatrixType(a, ONE, Z))
        self.assertNotIn("X", SCHEMA)
        self.assertEqual(loop_step_schema(SCHEMA, (("u", Var("u")),), ())["u"], SCHEMA["u"])
        with self.assertRaisesRegex(TypeCheckError, "zero-init unbound"):
            loop_step_schema(SCHEMA, (("Z", Var("Z")),), ())


LOOP_SHAPES = (
    ((("X", MatMul(Var("X"), Var("C"))),), (Var("A"),)),
    ((("X", MatMul(Var("Y"), Var("C"))), ("Y", Var("Y"))), (Var("A"), Var("A"))),
    ((("X", Transpose(Var("X"))),), (MatMul(Var("u"), Transpose(Var("u"))),)),
    ((("X", Var("C")),), (Var("A"),)),
    ((("X", Var("X")), ("A", Transpose(Var("A")))), (Var("u"), Var("C"))),
)


@mark.parametrize("bindings, inits", LOOP_SHAPES)
def test_both_loop_forms_type_alike(bindings: Any, inits: Any) -> None:
    def outcome(loop: Expr) -> object:
        try:
            return infer_type(SCHEMA, loop)
        except TypeCheckError as exc:
            return exc.rule

    canonical = outcome(ForCanonical("u", bindings, inits))
    counted = outcome(ForCounted(Var("u"), bindings, inits))
    assert canonical == counted
