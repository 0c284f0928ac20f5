"""
Typing rules for matrix and scalar expressions.

Size terms are compared syntactically; there is no unification beyond
equality. Loop initializers are typed under the enclosing schema and loop
bodies under the schema extended with every loop binding.
"""

from typing import Mapping, Sequence, Tuple

from .ir import (
    ONE,
    Add,
    Apply,
    Binding,
    Cast,
    Cond,
    Dec,
    Dialect,
    Diag,
    Div,
    Enc,
    Eq,
    Expr,
    ForCanonical,
    ForCounted,
    Let,
    Lit,
    MatlangError,
    MatMul,
    MatrixType,
    Mul,
    Ones,
    Param,
    PickAny,
    PointwiseFn,
    ScalarExpr,
    Schema,
    SemiringId,
    Sub,
    Transpose,
    Var,
    detect_dialect,
)

_ARITH = (SemiringId.INT, SemiringId.REAL)


class TypeCheckError(MatlangError):
    """A typing rule failed at ``path``."""

    def __init__(self, path: str, rule: str, expected: str, found: str) -> None:
        self.path = path
        self.rule = rule
        self.expected = expected
        self.found = found
        super().__init__(f"{path}: {rule}: expected {expected}, found {found}")


def check_scalar(env: Mapping[str, SemiringId], se: ScalarExpr, path: str = "$") -> SemiringId:
    """The ring a scalar expression evaluates to under parameter rings ``env``."""
    if isinstance(se, Param):
        if se.name not in env:
            raise TypeCheckError(path, "scalar param", "a function parameter", se.name)
        return env[se.name]
    if isinstance(se, Lit):
        return se.ring
    if isinstance(se, Cast):
        check_scalar(env, se.operand, f"{path}.operand")
        return se.target
    if isinstance(se, Enc):
        found = check_scalar(env, se.operand, f"{path}.operand")
        if found is not se.ring:
            raise TypeCheckError(path, "enc ring", str(se.ring), str(found))
        return SemiringId.REAL
    if isinstance(se, Dec):
        found = check_scalar(env, se.operand, f"{path}.operand")
        if found is not SemiringId.REAL:
            raise TypeCheckError(path, "dec ring", str(SemiringId.REAL), str(found))
        return se.ring
    if isinstance(se, Cond):
        w = check_scalar(env, se.w, f"{path}.w")
        x = check_scalar(env, se.x, f"{path}.x")
        if w is not x:
            raise TypeCheckError(path, "cond ring", str(w), str(x))
        y = check_scalar(env, se.y, f"{path}.y")
        z = check_scalar(env, se.z, f"{path}.z")
        if y is not z:
            raise TypeCheckError(path, "cond ring", str(y), str(z))
        return y

    left = check_scalar(env, se.left, f"{path}.left")  # type: ignore[attr-defined]
    right = check_scalar(env, se.right, f"{path}.right")  # type: ignore[attr-defined]
    if isinstance(se, (Add, Mul)):
        rule = "add ring" if isinstance(se, Add) else "mul ring"
        if left is not right:
            raise TypeCheckError(path, rule, str(left), str(right))
        return left
    if isinstance(se, Sub):
        if left is not right or left not in _ARITH:
            raise TypeCheckError(path, "sub ring", "int or real operands", f"{left} and {right}")
        return left
    if isinstance(se, Div):
        if left is not SemiringId.REAL or right is not SemiringId.REAL:
            raise TypeCheckError(path, "div ring", "real operands", f"{left} and {right}")
        return left
    if isinstance(se, Eq):
        if left is not right:
            raise TypeCheckError(path, "eq ring", str(left), str(right))
        return SemiringId.BOOL
    raise TypeError(f"not a scalar expression: {se!r}")


def check_function(fn: PointwiseFn, path: str = "$") -> SemiringId:
    return check_scalar(dict(fn.params), fn.body, path)


def loop_step_schema(
    s: Schema, bindings: Sequence[Binding], inits: Sequence[Expr], path: str = "$"
) -> Schema:
    """``s`` extended with each loop binding typed by its initializer.

    A zero-initialized loop (no ``inits``) keeps the binding's outer type.
    """
    if not inits:
        name = bindings[0][0]
        if name not in s:
            raise TypeCheckError(path, "zero-init unbound", f"{name} in scope", "nothing")
        return s.bind(name, s[name])
    types = [
        (name, _TypeChecker().infer(s, init, f"{path}.inits[{i}]"))
        for i, ((name, _), init) in enumerate(zip(bindings, inits))
    ]
    return s.bind_all(types)


class _TypeChecker:
    def infer(self, s: Schema, e: Expr, path: str) -> MatrixType:
        method = getattr(self, "type_" + type(e).__name__.lower())
        return method(s, e, path)  # type: ignore[no-any-return]

    def type_var(self, s: Schema, e: Var, path: str) -> MatrixType:
        if e.name not in s:
            raise TypeCheckError(path, "var unbound", "a schema variable", e.name)
        return s[e.name]

    def type_transpose(self, s: Schema, e: Transpose, path: str) -> MatrixType:
        t = self.infer(s, e.operand, f"{path}.operand")
        return MatrixType(t.cols, t.rows, t.ring)

    def type_ones(self, s: Schema, e: Ones, path: str) -> MatrixType:
        t = self.infer(s, e.operand, f"{path}.operand")
        return MatrixType(t.rows, ONE, t.ring)

    def type_diag(self, s: Schema, e: Diag, path: str) -> MatrixType:
        t = self.infer(s, e.operand, f"{path}.operand")
        if not t.is_vector:
            raise TypeCheckError(path, "diag vector", f"{t.rows} x 1", f"{t.rows} x {t.cols}")
        return MatrixType(t.rows, t.rows, t.ring)

    def type_matmul(self, s: Schema, e: MatMul, path: str) -> MatrixType:
        a = self.infer(s, e.left, f"{path}.left")
        b = self.infer(s, e.right, f"{path}.right")
        if a.cols != b.rows:
            raise TypeCheckError(path, "matmul inner dims", str(a.cols), str(b.rows))
        if a.ring is not b.ring:
            raise TypeCheckError(path, "matmul ring", str(a.ring), str(b.ring))
        return MatrixType(a.rows, b.cols, a.ring)

    def type_apply(self, s: Schema, e: Apply, path: str) -> MatrixType:
        if len(e.args) != e.fn.arity:
            raise TypeCheckError(
                path, "apply arity", f"{e.fn.arity} arguments", f"{len(e.args)}"
            )
        types = [self.infer(s, arg, f"{path}.args[{i}]") for i, arg in enumerate(e.args)]
        first = types[0]
        for i, (t, (_, ring)) in enumerate(zip(types, e.fn.params)):
            if not t.same_shape(first):
                raise TypeCheckError(
                    f"{path}.args[{i}]",
                    "apply shape",
                    f"{first.rows} x {first.cols}",
                    f"{t.rows} x {t.cols}",
                )
            if t.ring is not ring:
                raise TypeCheckError(f"{path}.args[{i}]", "apply ring", str(ring), str(t.ring))
        return first.with_ring(check_function(e.fn, f"{path}.fn"))

    def type_pickany(self, s: Schema, e: PickAny, path: str) -> MatrixType:
        return self.infer(s, e.operand, f"{path}.operand")

    def type_let(self, s: Schema, e: Let, path: str) -> MatrixType:
        bound = self.infer(s, e.bound, f"{path}.bound")
        return self.infer(s.bind(e.name, bound), e.body, f"{path}.body")

    def _loop(
        self, s: Schema, bindings: Tuple[Binding, ...], inits: Tuple[Expr, ...], path: str
    ) -> MatrixType:
        inner = loop_step_schema(s, bindings, inits, path)
        for i, (name, body) in enumerate(bindings):
            found = self.infer(inner, body, f"{path}.bindings[{i}]")
            if found != inner[name]:
                raise TypeCheckError(
                    f"{path}.bindings[{i}]", "loop body/init", str(inner[name]), str(found)
                )
        return inner[bindings[0][0]]

    def type_forcanonical(self, s: Schema, e: ForCanonical, path: str) -> MatrixType:
        if e.var not in s:
            raise TypeCheckError(path, "canonical vector", "a column vector in scope", e.var)
        v = s[e.var]
        if not v.is_vector:
            raise TypeCheckError(
                path, "canonical vector", f"{v.rows} x 1", f"{v.rows} x {v.cols}"
            )
        return self._loop(s, e.bindings, e.inits, path)

    def type_forcounted(self, s: Schema, e: ForCounted, path: str) -> MatrixType:
        d = self.infer(s, e.driver, f"{path}.driver")
        if not d.is_vector:
            raise TypeCheckError(
                f"{path}.driver", "driver vector", f"{d.rows} x 1", f"{d.rows} x {d.cols}"
            )
        return self._loop(s, e.bindings, e.inits, path)


def infer_type(s: Schema, e: Expr) -> MatrixType:
    """Type of ``e`` under schema ``s``; raises :class:`TypeCheckError`."""
    return _TypeChecker().infer(s, e, "$")


def check_program(s: Schema, e: Expr) -> Tuple[Dialect, MatrixType]:
    """Smallest dialect of a whole program and the type of its result."""
    dialect = detect_dialect(e, s)
    return dialect, infer_type(s, e)
