"""
Expression builders used by the lowering passes.

The small pointwise functions (constants, sums, the 0/1 subtraction) and
the macros that simulate native operations with loops: first and last
canonical vectors, ordering matrices, rotation, sums and matrix products.
Every builder returns plain IR; names it introduces come from a
:class:`~matlang.ir.NameSupply` so they never capture a program variable.
"""

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Type

from .ir import (
    Add,
    Apply,
    BinaryScalar,
    Cond,
    Diag,
    Expr,
    ForCanonical,
    ForCounted,
    Let,
    Lit,
    MatMul,
    NameSupply,
    Ones,
    Param,
    PickAny,
    PointwiseFn,
    SemiringId,
    Sub,
    Transpose,
    Var,
    all_names,
)
from .semiring import ScalarValue, one, zero

REAL = SemiringId.REAL

# rings with a native subtraction
ARITH_RINGS = (SemiringId.INT, SemiringId.REAL)


def const_fn(ring_in: SemiringId, value: ScalarValue) -> PointwiseFn:
    """``(c: ring_in) -> value``."""
    return PointwiseFn((("c", ring_in),), Lit(value.ring, value))


def binary_fn(op: Type[BinaryScalar], ring: SemiringId) -> PointwiseFn:
    """``(a: ring, b: ring) -> a op b``."""
    return PointwiseFn((("a", ring), ("b", ring)), op(Param("a"), Param("b")))


def monus_fn(ring: SemiringId) -> PointwiseFn:
    """Subtraction on zero/one values.

    Native for int and real; elsewhere ``cond(b, 1, cond(a, 1, 0, 0), a)``,
    which sends any other input pair to zero.
    """
    if ring in ARITH_RINGS:
        return binary_fn(Sub, ring)
    o, z = Lit(ring, one(ring)), Lit(ring, zero(ring))
    a, b = Param("a"), Param("b")
    return PointwiseFn((("a", ring), ("b", ring)), Cond(b, o, Cond(a, o, z, z), a))


def zero_fill(e: Expr, ring: SemiringId) -> Expr:
    """A zero matrix shaped like ``e``."""
    return Apply(const_fn(ring, zero(ring)), (e,))


def mat_add(a: Expr, b: Expr, ring: SemiringId) -> Expr:
    return Apply(binary_fn(Add, ring), (a, b))


def mat_sub(a: Expr, b: Expr, ring: SemiringId) -> Expr:
    return Apply(monus_fn(ring), (a, b))


@dataclass(frozen=True)
class OrderingMacros:
    emax: Expr
    emin: Expr
    s_le: Expr
    s_lt: Expr


class MacroBuilder:
    """Builds macros over ``ring``, counting every expansion.

    ``ring`` must have a native subtraction for the ordering matrices,
    the rotation and the sums.
    """

    def __init__(self, names: NameSupply, ring: SemiringId = REAL) -> None:
        self.names = names
        self.ring = ring
        self.expansions: "Counter[str]" = Counter()

    def _count(self, macro: str) -> None:
        self.expansions[macro] += 1

    def _require_arith(self, macro: str) -> None:
        if self.ring not in ARITH_RINGS:
            raise ValueError(f"{macro} needs an int or real ring, not {self.ring}")

    def emax(self, v: Expr) -> Expr:
        """Last canonical vector of ``v``'s dimension."""
        self._count("emax")
        name, x = self.names.fresh("v"), self.names.fresh("X")
        return Let(name, v, ForCanonical(name, ((x, Var(name)),), (Var(name),)))

    def emin(self, v: Expr) -> Expr:
        """First canonical vector of ``v``'s dimension."""
        self._count("emin")
        return Transpose(PickAny(Transpose(Ones(v))))

    def s_le(self, v: Expr) -> Expr:
        """Upper triangular matrix of ones, including the diagonal."""
        self._require_arith("s_le")
        self._count("s_le")
        ring = self.ring
        name, x, last = self.names.fresh("v"), self.names.fresh("X"), self.names.fresh("E")
        vv, xx, ee = Var(name), Var(x), Var(last)
        step = mat_add(
            mat_add(xx, MatMul(mat_add(MatMul(xx, ee), vv, ring), Transpose(vv)), ring),
            MatMul(vv, Transpose(ee)),
            ring,
        )
        loop = ForCanonical(name, ((x, step),), (zero_fill(Diag(vv), ring),))
        body = mat_sub(loop, MatMul(Ones(vv), Transpose(ee)), ring)
        return Let(name, v, Let(last, self.emax(vv), body))

    def s_lt(self, v: Expr) -> Expr:
        """Strictly upper triangular matrix of ones."""
        self._count("s_lt")
        name = self.names.fresh("V")
        w = Var(name)
        return Let(name, v, mat_sub(self.s_le(w), Diag(Ones(w)), self.ring))

    def rotate(self, v: Expr) -> Expr:
        """Permutation moving every entry of a vector one position up, cyclically."""
        self._count("rotate")
        name = self.names.fresh("V")
        w = Var(name)
        shift = PickAny(self.s_lt(w))
        wrap = MatMul(self.emax(w), Transpose(self.emin(w)))
        return Let(name, v, mat_add(shift, wrap, self.ring))

    def _sum_loop(
        self,
        zero_fn: PointwiseFn,
        plus_fn: PointwiseFn,
        w: Var,
        rotation: Optional[Expr],
    ) -> Expr:
        x = self.names.fresh("X")
        rot_name = None
        if rotation is None:
            rot_name = self.names.fresh("R")
            rotation = Var(rot_name)
        loop = ForCounted(
            w,
            ((x, Apply(plus_fn, (w, MatMul(rotation, Var(x))))),),
            (Apply(zero_fn, (w,)),),
        )
        if rot_name is None:
            return loop
        return Let(rot_name, self.rotate(w), loop)

    def sum_state(
        self,
        zero_fn: PointwiseFn,
        plus_fn: PointwiseFn,
        v: Expr,
        rotation: Optional[Expr] = None,
    ) -> Expr:
        """The loop whose every entry ends up as the sum of all of ``v``."""
        self._require_arith("sum")
        name = self.names.fresh("V")
        return Let(name, v, self._sum_loop(zero_fn, plus_fn, Var(name), rotation))

    def sum(
        self,
        zero_fn: PointwiseFn,
        plus_fn: PointwiseFn,
        v: Expr,
        rotation: Optional[Expr] = None,
        last: Optional[Expr] = None,
    ) -> Expr:
        """``zero ⊕ v_1 ⊕ ... ⊕ v_n`` as a ``1 x 1`` matrix.

        ``rotation`` and ``last`` may name precomputed ``rotate`` and ``emax``
        results for ``v``'s dimension.
        """
        self._require_arith("sum")
        self._count("sum")
        name = self.names.fresh("V")
        w = Var(name)
        state = self._sum_loop(zero_fn, plus_fn, w, rotation)
        if last is None:
            last = self.emax(w)
        return Let(name, v, MatMul(Transpose(last), state))

    def _dim_zero(self, e1: Expr, e2: Expr) -> Expr:
        # zero matrix shaped like e1 * e2, without multiplying their values
        return zero_fill(MatMul(Ones(e1), Transpose(Ones(Transpose(e2)))), self.ring)

    def cellmul(
        self,
        zero_value: ScalarValue,
        plus_fn: PointwiseFn,
        times_fn: PointwiseFn,
        row: Expr,
        col: Expr,
        rotation: Optional[Expr] = None,
        last: Optional[Expr] = None,
    ) -> Expr:
        """``row`` (``1 x k``) times ``col`` (``k x 1``) as a ``1 x 1`` matrix."""
        self._count("cellmul")
        terms = Apply(times_fn, (Transpose(row), col))
        return self.sum(const_fn(self.ring, zero_value), plus_fn, terms, rotation, last)

    def rowmul(
        self,
        zero_value: ScalarValue,
        plus_fn: PointwiseFn,
        times_fn: PointwiseFn,
        row: Expr,
        e2: Expr,
        rotation: Optional[Expr] = None,
        last: Optional[Expr] = None,
    ) -> Expr:
        """``row`` (``1 x k``) times ``e2`` (``k x c``), one column at a time."""
        self._count("rowmul")
        name, x, col = self.names.fresh("v"), self.names.fresh("X"), self.names.fresh("B")
        v = Var(name)
        cell = self.cellmul(zero_value, plus_fn, times_fn, row, Var(col), rotation, last)
        step = Let(col, MatMul(e2, v), mat_add(Var(x), MatMul(cell, Transpose(v)), self.ring))
        loop = ForCanonical(name, ((x, step),), (self._dim_zero(row, e2),))
        return Let(name, Ones(Transpose(e2)), loop)

    def matmul(
        self,
        zero_value: ScalarValue,
        plus_fn: PointwiseFn,
        times_fn: PointwiseFn,
        e1: Expr,
        e2: Expr,
    ) -> Expr:
        """``e1 * e2`` under ``plus_fn``/``times_fn``, computed cell by cell.

        Operands, the rotation and the last canonical vector of the inner
        dimension are bound once outside the loops.
        """
        self._count("matmul")
        a, b = self.names.fresh("A"), self.names.fresh("B")
        inner, rot, last = self.names.fresh("K"), self.names.fresh("R"), self.names.fresh("E")
        name, x, row = self.names.fresh("v"), self.names.fresh("X"), self.names.fresh("Ar")
        v = Var(name)
        product = self.rowmul(
            zero_value, plus_fn, times_fn, Var(row), Var(b), Var(rot), Var(last)
        )
        step = Let(
            row,
            MatMul(Transpose(v), Var(a)),
            mat_add(Var(x), MatMul(v, product), self.ring),
        )
        loop = Let(
            name,
            Ones(Var(a)),
            ForCanonical(name, ((x, step),), (self._dim_zero(Var(a), Var(b)),)),
        )
        return Let(
            a,
            e1,
            Let(
                b,
                e2,
                Let(
                    inner,
                    Ones(Var(b)),
                    Let(rot, self.rotate(Var(inner)), Let(last, self.emax(Var(inner)), loop)),
                ),
            ),
        )


def _builder(v_expr: Expr, ring: SemiringId, names: Optional[NameSupply]) -> MacroBuilder:
    if names is None:
        names = NameSupply(all_names(v_expr))
    return MacroBuilder(names, ring)


def build_ordering_macros(
    v_expr: Expr, ring: SemiringId = REAL, names: Optional[NameSupply] = None
) -> OrderingMacros:
    """``emax``, ``emin``, ``S<=`` and ``S<`` for the dimension of ``v_expr``."""
    b = _builder(v_expr, ring, names)
    return OrderingMacros(b.emax(v_expr), b.emin(v_expr), b.s_le(v_expr), b.s_lt(v_expr))


def build_rotate(
    v_expr: Expr, ring: SemiringId = REAL, names: Optional[NameSupply] = None
) -> Expr:
    return _builder(v_expr, ring, names).rotate(v_expr)


def build_sum(
    zero_fn: PointwiseFn,
    plus_fn: PointwiseFn,
    v_expr: Expr,
    ring: SemiringId = REAL,
    names: Optional[NameSupply] = None,
) -> Expr:
    return _builder(v_expr, ring, names).sum(zero_fn, plus_fn, v_expr)


def build_sum_state(
    zero_fn: PointwiseFn,
    plus_fn: PointwiseFn,
    v_expr: Expr,
    ring: SemiringId = REAL,
    names: Optional[NameSupply] = None,
) -> Expr:
    return _builder(v_expr, ring, names).sum_state(zero_fn, plus_fn, v_expr)


def build_matmul_sim(
    zero_value: ScalarValue,
    plus_fn: PointwiseFn,
    times_fn: PointwiseFn,
    e1: Expr,
    e2: Expr,
    ring: SemiringId = REAL,
    names: Optional[NameSupply] = None,
) -> Expr:
    if names is None:
        names = NameSupply(all_names(e1) | all_names(e2))
    return MacroBuilder(names, ring).matmul(zero_value, plus_fn, times_fn, e1, e2)
