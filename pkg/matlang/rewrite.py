"""
Semantics-preserving lowering passes between the dialects.

* for -> sifor: zero-initialized loops get an explicit zero initializer
* sifor -> dec: canonical loops track their canonical vector in two extra
  bindings of a counted loop
* dec -> sifor: counted loops iterate over a let-bound driver; ``pickany``
  is simulated by nested canonical loops
* muse/core -> dec: every value is encoded into the reals with infinities;
  ``ones``, ``pickany``, matrix products and pointwise functions are
  rewritten to act on encoded values
* core -> sifor: the composition of the last two
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .ir import (
    Add,
    Apply,
    Cast,
    Cond,
    Dec,
    Dialect,
    Diag,
    Enc,
    Expr,
    ForCanonical,
    ForCounted,
    Let,
    Lit,
    MatlangError,
    MatMul,
    Mul,
    NameSupply,
    Ones,
    Param,
    PickAny,
    PointwiseFn,
    ScalarExpr,
    Schema,
    SemiringId,
    Transpose,
    Var,
    all_names,
    detect_dialect,
    dialect_violations,
    free_vars,
    iter_nodes,
    iter_scalar,
    output_ring,
    scalar_children,
)
from .evaluate import Evaluator, Instance, Matrix, decode_matrix, encode_instance
from .macros import MacroBuilder, mat_add, mat_sub, zero_fill
from .semiring import ScalarValue, one, zero
from .typecheck import infer_type, loop_step_schema

logger = logging.getLogger(__name__)

REAL = SemiringId.REAL


class LoweringError(MatlangError):
    """A pass was given a program outside its source dialect, or failed to
    produce one in its target dialect."""


@dataclass
class LoweringReport:
    source: Dialect
    target: Dialect
    fresh_names: List[str] = field(default_factory=list)
    expansions: "Counter[str]" = field(default_factory=Counter)
    encoded: bool = False

    def render(self) -> str:
        lines = [f"lowered {self.source} -> {self.target}"]
        if self.encoded:
            lines.append("values encoded over real")
        if self.fresh_names:
            lines.append("fresh names: " + ", ".join(self.fresh_names))
        for macro, count in sorted(self.expansions.items()):
            lines.append(f"  {macro}: {count}")
        return "\n".join(lines)

    def as_record(self) -> Dict[str, Any]:
        return {
            "source": str(self.source),
            "target": str(self.target),
            "encoded": self.encoded,
            "fresh_names": list(self.fresh_names),
            "expansions": dict(sorted(self.expansions.items())),
        }


@dataclass(frozen=True)
class Lowered:
    expr: Expr
    schema: Schema
    # ring to decode the result into, when values were encoded
    decode_ring: Optional[SemiringId]
    report: LoweringReport


class _Rewriter:
    """Structural rewriting with the scope's types at hand.

    Subclasses override ``rewrite_<node>`` for the nodes they change.
    ``scope`` always types the *input* program.
    """

    def __init__(self, names: NameSupply) -> None:
        self.names = names
        self.expansions: "Counter[str]" = Counter()

    def rewrite(self, scope: Schema, e: Expr) -> Expr:
        method = getattr(self, "rewrite_" + type(e).__name__.lower())
        return method(scope, e)  # type: ignore[no-any-return]

    def macros(self, ring: SemiringId) -> MacroBuilder:
        builder = MacroBuilder(self.names, ring)
        builder.expansions = self.expansions
        return builder

    def rewrite_var(self, scope: Schema, e: Var) -> Expr:
        return e

    def rewrite_transpose(self, scope: Schema, e: Transpose) -> Expr:
        return Transpose(self.rewrite(scope, e.operand))

    def rewrite_ones(self, scope: Schema, e: Ones) -> Expr:
        return Ones(self.rewrite(scope, e.operand))

    def rewrite_diag(self, scope: Schema, e: Diag) -> Expr:
        return Diag(self.rewrite(scope, e.operand))

    def rewrite_matmul(self, scope: Schema, e: MatMul) -> Expr:
        return MatMul(self.rewrite(scope, e.left), self.rewrite(scope, e.right))

    def rewrite_apply(self, scope: Schema, e: Apply) -> Expr:
        return Apply(e.fn, tuple(self.rewrite(scope, arg) for arg in e.args))

    def rewrite_pickany(self, scope: Schema, e: PickAny) -> Expr:
        return PickAny(self.rewrite(scope, e.operand))

    def rewrite_let(self, scope: Schema, e: Let) -> Expr:
        inner = scope.bind(e.name, infer_type(scope, e.bound))
        return Let(e.name, self.rewrite(scope, e.bound), self.rewrite(inner, e.body))

    def loop_parts(
        self, scope: Schema, e: Any
    ) -> Tuple[Tuple[Tuple[str, Expr], ...], Tuple[Expr, ...]]:
        inner = loop_step_schema(scope, e.bindings, e.inits)
        bindings = tuple((name, self.rewrite(inner, body)) for name, body in e.bindings)
        inits = tuple(self.rewrite(scope, init) for init in e.inits)
        return bindings, inits

    def rewrite_forcanonical(self, scope: Schema, e: ForCanonical) -> Expr:
        bindings, inits = self.loop_parts(scope, e)
        return ForCanonical(e.var, bindings, inits)

    def rewrite_forcounted(self, scope: Schema, e: ForCounted) -> Expr:
        bindings, inits = self.loop_parts(scope, e)
        return ForCounted(self.rewrite(scope, e.driver), bindings, inits)


class _ForToSifor(_Rewriter):
    def rewrite_forcanonical(self, scope: Schema, e: ForCanonical) -> Expr:
        bindings, inits = self.loop_parts(scope, e)
        if e.is_zero_init:
            name = e.names[0]
            self.expansions["zero-init"] += 1
            inits = (zero_fill(Var(name), scope[name].ring),)
        return ForCanonical(e.var, bindings, inits)


class _SiforToDec(_ForToSifor):
    def rewrite_forcanonical(self, scope: Schema, e: ForCanonical) -> Expr:
        loop = super().rewrite_forcanonical(scope, e)
        assert isinstance(loop, ForCanonical)
        ring = scope[e.var].ring
        self.expansions["canonical-loop"] += 1
        v, big_v = Var(e.var), Var(self.names.fresh("V"))
        remaining = mat_sub(big_v, Transpose(v), ring)
        bindings = loop.bindings + (
            (e.var, Transpose(PickAny(remaining))),
            (big_v.name, remaining),
        )
        inits = loop.inits + (
            Transpose(PickAny(Transpose(Ones(v)))),
            Transpose(Ones(v)),
        )
        return ForCounted(v, bindings, inits)


class _DecToSifor(_Rewriter):
    def rewrite_forcounted(self, scope: Schema, e: ForCounted) -> Expr:
        bindings, inits = self.loop_parts(scope, e)
        self.expansions["counted-loop"] += 1
        u = self.names.fresh("u")
        return Let(u, self.rewrite(scope, e.driver), ForCanonical(u, bindings, inits))

    def rewrite_pickany(self, scope: Schema, e: PickAny) -> Expr:
        ring = infer_type(scope, e.operand).ring
        self.expansions["pickany"] += 1
        return self.simulate_pickany(self.rewrite(scope, e.operand), ring)

    def simulate_pickany(self, operand: Expr, ring: SemiringId) -> Expr:
        """Rows by an outer loop, columns by an inner one; a cell is taken
        while the row built so far sums to zero."""
        fresh = self.names.fresh
        a, v, w, b = fresh("A"), fresh("v"), fresh("w"), fresh("B")
        x, y, r, f, d, p = fresh("X"), fresh("Y"), fresh("R"), fresh("F"), fresh("D"), fresh("P")
        pick = PointwiseFn(
            (("y", ring), ("d", ring), ("p", ring)),
            Cond(Param("d"), Lit(ring, zero(ring)), Param("p"), Param("y")),
        )
        cell = Let(
            d,
            MatMul(Var(y), Var(b)),
            Let(p, MatMul(Var(r), Diag(Var(w))), Apply(pick, (Var(y), Var(d), Var(p)))),
        )
        row = ForCanonical(w, ((y, cell),), (zero_fill(Transpose(Var(w)), ring),))
        step = Let(
            r,
            MatMul(Transpose(Var(v)), Var(a)),
            Let(f, row, mat_add(Var(x), MatMul(Var(v), Var(f)), ring)),
        )
        rows = ForCanonical(v, ((x, step),), (zero_fill(Var(a), ring),))
        return Let(
            a,
            operand,
            Let(
                v,
                Ones(Var(a)),
                Let(
                    w,
                    Ones(Transpose(Var(a))),
                    Let(b, MatMul(Var(w), Transpose(Var(w))), rows),
                ),
            ),
        )


def _decode_params(se: ScalarExpr, rings: Dict[str, SemiringId]) -> ScalarExpr:
    if isinstance(se, Param):
        return Dec(rings[se.name], se)
    if not scalar_children(se):
        return se
    kwargs = {
        name: _decode_params(value, rings) if isinstance(value, ScalarExpr) else value
        for name, value in vars(se).items()
    }
    return type(se)(**kwargs)


def _real_only(fn: PointwiseFn) -> bool:
    if any(ring is not REAL for _, ring in fn.params) or output_ring(fn) is not REAL:
        return False
    for node in iter_scalar(fn.body):
        if isinstance(node, (Cast, Enc, Dec)):
            return False
        if isinstance(node, Lit) and node.ring is not REAL:
            return False
    return True


def encode_fn(fn: PointwiseFn) -> PointwiseFn:
    """``enc . fn . (dec, ..., dec)`` over encoded reals.

    Functions computing on reals alone are returned as they are.
    """
    if _real_only(fn):
        return fn
    rings = dict(fn.params)
    body = Enc(output_ring(fn), _decode_params(fn.body, rings))
    return PointwiseFn(tuple((name, REAL) for name, _ in fn.params), body)


def encoded_binary(op: Any, ring: SemiringId) -> PointwiseFn:
    """``op`` of ``ring`` acting on encoded operands."""
    a, b = Param("a"), Param("b")
    if ring is REAL:
        return PointwiseFn((("a", REAL), ("b", REAL)), op(a, b))
    body = Enc(ring, op(Dec(ring, a), Dec(ring, b)))
    return PointwiseFn((("a", REAL), ("b", REAL)), body)


def encode_schema(s: Schema) -> Schema:
    return Schema({name: t.with_ring(REAL) for name, t in s.items()})


class _MuseToDec(_Rewriter):
    """Produces a program over encoded reals; may emit canonical loops."""

    def rewrite_apply(self, scope: Schema, e: Apply) -> Expr:
        fn = encode_fn(e.fn)
        if fn is not e.fn:
            self.expansions["encoded-apply"] += 1
        return Apply(fn, tuple(self.rewrite(scope, arg) for arg in e.args))

    def rewrite_ones(self, scope: Schema, e: Ones) -> Expr:
        ring = infer_type(scope, e.operand).ring
        ones = Ones(self.rewrite(scope, e.operand))
        if ring is REAL:
            return ones
        self.expansions["encoded-ones"] += 1
        fn = PointwiseFn((("c", REAL),), Enc(ring, Lit(ring, one(ring))))
        return Apply(fn, (ones,))

    def rewrite_pickany(self, scope: Schema, e: PickAny) -> Expr:
        ring = infer_type(scope, e.operand).ring
        operand = self.rewrite(scope, e.operand)
        if ring is REAL:
            return PickAny(operand)
        self.expansions["encoded-pickany"] += 1
        # enc(0) is 0.0 in every ring
        z, o = Lit(REAL, ScalarValue(REAL, 0.0)), Lit(REAL, ScalarValue(REAL, 1.0))
        indicator = PointwiseFn((("c", REAL),), Cond(Param("c"), z, z, o))
        mask = PointwiseFn((("c", REAL), ("p", REAL)), Cond(Param("p"), o, Param("c"), z))
        name = self.names.fresh("E")
        picked = PickAny(Apply(indicator, (Var(name),)))
        return Let(name, operand, Apply(mask, (Var(name), picked)))

    def rewrite_matmul(self, scope: Schema, e: MatMul) -> Expr:
        ring = infer_type(scope, e.left).ring
        left, right = self.rewrite(scope, e.left), self.rewrite(scope, e.right)
        if ring is REAL:
            return MatMul(left, right)
        return self.macros(REAL).matmul(
            ScalarValue(REAL, 0.0),
            encoded_binary(Add, ring),
            encoded_binary(Mul, ring),
            left,
            right,
        )

    def rewrite_forcanonical(self, scope: Schema, e: ForCanonical) -> Expr:
        raise LoweringError("canonical loops must be lowered before encoding")


def _has(e: Expr, kind: type) -> bool:
    return any(isinstance(node, kind) for node in iter_nodes(e))


def _check_output(e: Expr, target: Dialect, s: Schema, pass_name: str) -> None:
    violations = dialect_violations(e, target, s)
    if violations:
        details = "; ".join(str(v) for v in violations)
        raise LoweringError(f"{pass_name} produced a program outside {target}: {details}")


def _check_input(e: Expr, s: Schema, allowed: Tuple[Dialect, ...], pass_name: str) -> Dialect:
    for d in allowed:
        if not dialect_violations(e, d, s):
            return d
    details = "; ".join(str(v) for v in dialect_violations(e, allowed[-1], s))
    raise LoweringError(
        f"{pass_name} expects a program in {'/'.join(map(str, allowed))}: {details}"
    )


def _run(rewriter: _Rewriter, s: Schema, e: Expr, report: LoweringReport) -> Expr:
    out = rewriter.rewrite(s, e)
    report.fresh_names.extend(
        name for name in rewriter.names.issued if name not in report.fresh_names
    )
    report.expansions.update(rewriter.expansions)
    rewriter.expansions = Counter()
    logger.debug("%s: %s", type(rewriter).__name__, dict(report.expansions))
    return out


def _require_schema(e: Expr, s: Optional[Schema]) -> Schema:
    if s is not None:
        return s
    missing = sorted(free_vars(e))
    if missing:
        raise LoweringError(f"a schema is needed to type {', '.join(missing)}")
    return Schema()


def lower_for_to_sifor(e: Expr, s: Optional[Schema] = None) -> Expr:
    """Give every zero-initialized canonical loop an explicit zero initializer."""
    s = _require_schema(e, s)
    _check_input(e, s, (Dialect.FOR_ML, Dialect.SIFOR_ML), "for -> sifor")
    report = LoweringReport(Dialect.FOR_ML, Dialect.SIFOR_ML)
    out = _run(_ForToSifor(NameSupply(all_names(e))), s, e, report)
    _check_output(out, Dialect.SIFOR_ML, s, "for -> sifor")
    return out


def _sifor_to_dec(e: Expr, s: Schema, report: LoweringReport) -> Expr:
    return _run(_SiforToDec(NameSupply(all_names(e))), s, e, report)


def lower_sifor_to_dec(e: Expr, s: Optional[Schema] = None) -> Expr:
    """Replace canonical loops by counted loops that track the canonical vector."""
    s = _require_schema(e, s)
    source = _check_input(
        e, s, (Dialect.FOR_ML, Dialect.SIFOR_ML, Dialect.DEC_ML), "sifor -> dec"
    )
    out = _sifor_to_dec(e, s, LoweringReport(source, Dialect.DEC_ML))
    _check_output(out, Dialect.DEC_ML, s, "sifor -> dec")
    return out


def _dec_to_sifor(e: Expr, s: Schema, report: LoweringReport) -> Expr:
    return _run(_DecToSifor(NameSupply(all_names(e))), s, e, report)


def lower_dec_to_sifor(e: Expr, s: Optional[Schema] = None) -> Expr:
    """Turn counted loops into canonical ones and simulate ``pickany``."""
    s = _require_schema(e, s)
    source = _check_input(e, s, (Dialect.SIFOR_ML, Dialect.DEC_ML), "dec -> sifor")
    out = _dec_to_sifor(e, s, LoweringReport(source, Dialect.SIFOR_ML))
    _check_output(out, Dialect.SIFOR_ML, s, "dec -> sifor")
    return out


def _encode(e: Expr, s: Schema, report: LoweringReport) -> Tuple[Expr, Schema]:
    if _has(e, ForCanonical):
        e = _sifor_to_dec(e, s, report)
    names = NameSupply(all_names(e))
    hybrid = _run(_MuseToDec(names), s, e, report)
    encoded = encode_schema(s)
    # canonical loops emitted by the product macro
    out = _run(_SiforToDec(names), encoded, hybrid, report)
    report.encoded = True
    return out, encoded


def lower_muse_to_dec(e: Expr, s: Schema) -> Expr:
    """A single-ring counted-loop program over encoded reals.

    Decoding its result entrywise into the ring of ``e`` gives the result of ``e``.
    """
    source = _check_input(
        e, s, (Dialect.SIFOR_ML, Dialect.DEC_ML, Dialect.CORE, Dialect.MUSE_ML), "muse -> dec"
    )
    out, encoded = _encode(e, s, LoweringReport(source, Dialect.DEC_ML))
    _check_output(out, Dialect.DEC_ML, encoded, "muse -> dec")
    return out


def simulate_core_in_sifor(e: Expr, s: Schema) -> Expr:
    """The canonical-loop program over encoded reals simulating ``e``."""
    return lower(e, s, Dialect.SIFOR_ML, encode=True).expr


def lower(e: Expr, s: Schema, target: Dialect, encode: Optional[bool] = None) -> Lowered:
    """Lower ``e`` to ``target`` (``dec`` or ``sifor``), choosing the passes
    by the program's own dialect.

    Multi-semiring programs are always encoded; ``encode=True`` forces the
    encoding for single-ring programs too.
    """
    source = detect_dialect(e, s)
    if target not in (Dialect.DEC_ML, Dialect.SIFOR_ML):
        raise LoweringError(f"cannot lower to {target}; targets are dec and sifor")
    encode = bool(encode) or source in (Dialect.CORE, Dialect.MUSE_ML)
    report = LoweringReport(source, target)
    schema, decode_ring = s, None
    if encode:
        decode_ring = infer_type(s, e).ring
        out, schema = _encode(e, s, report)
        if target is Dialect.SIFOR_ML:
            out = _dec_to_sifor(out, schema, report)
    elif target is Dialect.DEC_ML:
        out = _sifor_to_dec(e, s, report)
    elif source is Dialect.DEC_ML:
        out = _dec_to_sifor(e, s, report)
    else:
        out = _run(_ForToSifor(NameSupply(all_names(e))), s, e, report)
    _check_output(out, target, schema, f"{source} -> {target}")
    logger.info("lowered %s -> %s with %d fresh names", source, target, len(report.fresh_names))
    return Lowered(out, schema, decode_ring, report)


def evaluate_lowered(
    lowered: Lowered, instance: Instance, evaluator: Optional[Evaluator] = None
) -> Matrix:
    """Evaluate a lowered program on the original program's instance,
    encoding the inputs and decoding the result when the lowering encoded."""
    if evaluator is None:
        evaluator = Evaluator()
    if lowered.decode_ring is None:
        return evaluator.evaluate(instance, lowered.expr)
    result = evaluator.evaluate(encode_instance(instance), lowered.expr)
    return decode_matrix(lowered.decode_ring, result)
