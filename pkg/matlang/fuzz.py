"""
Type-directed program generation and differential testing of the lowering
passes.

Every case is generated from its own ``random.Random`` seeded with
``"<seed>:<index>"``, so a case can be replayed alone and results do not
depend on how cases are spread over worker processes.
"""

import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from .evaluate import (
    DEFAULT_ELEMENT_LIMIT,
    Evaluator,
    Instance,
    Matrix,
    first_difference,
)
from .ir import (
    ONE,
    Add,
    Apply,
    Cast,
    Cond,
    Dialect,
    Diag,
    Expr,
    ForCanonical,
    ForCounted,
    Let,
    Lit,
    MatlangError,
    MatMul,
    MatrixType,
    Mul,
    NameSupply,
    Ones,
    Param,
    PickAny,
    PointwiseFn,
    ScalarExpr,
    Schema,
    SemiringId,
    SizeTerm,
    Transpose,
    Var,
    detect_dialect,
)
from .rewrite import evaluate_lowered, lower
from .semiring import INF, EvaluationError, ScalarValue, get_semiring
from .textio import parse_program, print_matrix, print_program
from .typecheck import infer_type

logger = logging.getLogger(__name__)

SIZE_TERMS = (SizeTerm("a"), SizeTerm("b"), ONE)
DEFAULT_DIALECTS = (
    Dialect.ML,
    Dialect.FOR_ML,
    Dialect.SIFOR_ML,
    Dialect.DEC_ML,
    Dialect.CORE,
)

# small entries keep products and loop powers inside 64 bits most of the time
_SAMPLES: Dict[SemiringId, Tuple[Any, ...]] = {
    SemiringId.BOOL: (False, False, True),
    SemiringId.INT: (0, 0, 1, 2, 3, -1),
    SemiringId.REAL: (0.0, 0.0, 1.0, 0.5, 2.0, -1.5),
    SemiringId.INT_MIN_PLUS: (INF, INF, 0, 1, 2, 5),
    SemiringId.REAL_MIN_PLUS: (INF, INF, 0.0, 1.5, 2.0, -0.5),
    SemiringId.INT_MAX_PLUS: (-INF, -INF, 0, 1, 3, -2),
    SemiringId.REAL_MAX_PLUS: (-INF, -INF, 0.0, 0.5, 2.5, -1.0),
}


@dataclass(frozen=True)
class FuzzConfig:
    seed: int = 0
    cases: int = 300
    max_dim: int = 6
    max_depth: int = 4
    # loops nest inside loop bodies up to this depth
    max_loop_depth: int = 1
    dialects: Tuple[Dialect, ...] = DEFAULT_DIALECTS
    # also push single-ring programs through the encoded lowering
    encode_all: bool = False
    element_limit: int = DEFAULT_ELEMENT_LIMIT

    def __post_init__(self) -> None:
        if self.cases < 0:
            raise ValueError(f"cases must not be negative, got {self.cases}")
        if self.max_dim < 1:
            raise ValueError(f"max_dim must be positive, got {self.max_dim}")
        if self.max_loop_depth < 0:
            raise ValueError(f"max_loop_depth must not be negative, got {self.max_loop_depth}")
        if not self.dialects:
            raise ValueError("at least one dialect is needed")


def _var_name(ring: SemiringId, rows: SizeTerm, cols: SizeTerm) -> str:
    return f"M{list(SemiringId).index(ring)}{rows}{cols}"


class ProgramGenerator:
    """Generates well-typed programs of one dialect, top-down from a result type.

    The schema holds a matrix of every shape over ``a``, ``b`` and ``1`` for
    each ring in use, so every type the generator asks for has a leaf.
    """

    def __init__(
        self,
        rng: random.Random,
        dialect: Dialect,
        max_depth: int = 4,
        max_loop_depth: int = 1,
    ) -> None:
        self.rng = rng
        self.dialect = dialect
        self.max_depth = max_depth
        self.max_loop_depth = max_loop_depth
        all_rings = list(SemiringId)
        if dialect in (Dialect.CORE, Dialect.MUSE_ML):
            self.rings = rng.sample(all_rings, 2)
        else:
            self.rings = [rng.choice(all_rings)]
        self.schema = Schema(
            {
                _var_name(ring, rows, cols): MatrixType(rows, cols, ring)
                for ring in self.rings
                for rows in SIZE_TERMS
                for cols in SIZE_TERMS
            }
        )
        self.names = NameSupply(self.schema)
        self._loop_depth = 0

    def program(self) -> Tuple[Schema, Expr]:
        target = MatrixType(self.rng.choice(SIZE_TERMS), self.rng.choice(SIZE_TERMS), self.rings[0])
        return self.schema, self.expr(self.schema, target, self.max_depth)

    def instance(self, max_dim: int) -> Instance:
        sizes = {term.symbol: self.rng.randint(1, max_dim) for term in SIZE_TERMS if term.symbol}
        mats = {}
        for name, t in self.schema.items():
            rows = 1 if t.rows.is_one else sizes[str(t.rows)]
            cols = 1 if t.cols.is_one else sizes[str(t.cols)]
            samples = _SAMPLES[t.ring]
            data = [[self.rng.choice(samples) for _ in range(cols)] for _ in range(rows)]
            mats[name] = Matrix.from_rows(t.ring, data)
        return Instance(sizes, mats)

    # matrix expressions

    def _productions(self, t: MatrixType) -> List[str]:
        kinds = ["leaf", "transpose", "matmul", "apply", "let"]
        if t.cols.is_one:
            kinds.append("ones")
        if t.rows == t.cols:
            kinds.append("diag")
        d = self.dialect
        if d in (Dialect.DEC_ML, Dialect.CORE, Dialect.MUSE_ML):
            kinds.append("pickany")
        if self._loop_depth < self.max_loop_depth:
            if d in (Dialect.FOR_ML, Dialect.SIFOR_ML):
                kinds.append("canonical")
            if d is Dialect.FOR_ML:
                kinds.append("zero_init")
            if d in (Dialect.DEC_ML, Dialect.CORE, Dialect.MUSE_ML):
                kinds.append("counted")
        if len(self.rings) > 1:
            kinds.append("cast")
        return kinds

    def expr(self, scope: Schema, t: MatrixType, depth: int) -> Expr:
        if depth <= 0:
            return self.gen_leaf(scope, t, depth)
        kind = self.rng.choice(self._productions(t))
        method: Callable[[Schema, MatrixType, int], Expr] = getattr(self, "gen_" + kind)
        return method(scope, t, depth - 1)

    def _random_type(self, cols: Optional[SizeTerm] = None) -> MatrixType:
        return MatrixType(
            self.rng.choice(SIZE_TERMS),
            cols if cols is not None else self.rng.choice(SIZE_TERMS),
            self.rng.choice(self.rings),
        )

    def gen_leaf(self, scope: Schema, t: MatrixType, depth: int) -> Expr:
        names = sorted(name for name, u in scope.items() if u == t)
        return Var(self.rng.choice(names))

    def gen_transpose(self, scope: Schema, t: MatrixType, depth: int) -> Expr:
        return Transpose(self.expr(scope, MatrixType(t.cols, t.rows, t.ring), depth))

    def gen_matmul(self, scope: Schema, t: MatrixType, depth: int) -> Expr:
        inner = self.rng.choice(SIZE_TERMS)
        left = self.expr(scope, MatrixType(t.rows, inner, t.ring), depth)
        right = self.expr(scope, MatrixType(inner, t.cols, t.ring), depth)
        return MatMul(left, right)

    def gen_ones(self, scope: Schema, t: MatrixType, depth: int) -> Expr:
        return Ones(self.expr(scope, MatrixType(t.rows, self.rng.choice(SIZE_TERMS), t.ring), depth))

    def gen_diag(self, scope: Schema, t: MatrixType, depth: int) -> Expr:
        return Diag(self.expr(scope, MatrixType(t.rows, ONE, t.ring), depth))

    def gen_pickany(self, scope: Schema, t: MatrixType, depth: int) -> Expr:
        return PickAny(self.expr(scope, t, depth))

    def gen_apply(self, scope: Schema, t: MatrixType, depth: int) -> Expr:
        arity = self.rng.randint(1, 2)
        params = tuple((name, t.ring) for name in ("a", "b")[:arity])
        fn = PointwiseFn(params, self.scalar(t.ring, [name for name, _ in params], 2))
        return Apply(fn, tuple(self.expr(scope, t, depth) for _ in params))

    def gen_cast(self, scope: Schema, t: MatrixType, depth: int) -> Expr:
        source = self.rng.choice([ring for ring in self.rings if ring is not t.ring])
        fn = PointwiseFn((("c", source),), Cast(t.ring, Param("c")))
        return Apply(fn, (self.expr(scope, t.with_ring(source), depth),))

    def gen_let(self, scope: Schema, t: MatrixType, depth: int) -> Expr:
        name = self.names.fresh("L")
        bound_type = self._random_type()
        bound = self.expr(scope, bound_type, depth)
        return Let(name, bound, self.expr(scope.bind(name, bound_type), t, depth))

    def _loop_bodies(
        self, scope: Schema, types: Sequence[Tuple[str, MatrixType]], depth: int
    ) -> Tuple[Tuple[str, Expr], ...]:
        inner = scope.bind_all(types)
        self._loop_depth += 1
        try:
            return tuple((name, self.expr(inner, u, depth)) for name, u in types)
        finally:
            self._loop_depth -= 1

    def _loop_types(self, t: MatrixType) -> List[Tuple[str, MatrixType]]:
        types = [(self.names.fresh("X"), t)]
        if self.dialect is not Dialect.FOR_ML and self.rng.random() < 0.3:
            types.append((self.names.fresh("Y"), self._random_type()))
        return types

    def gen_canonical(self, scope: Schema, t: MatrixType, depth: int) -> Expr:
        v, v_type = self.names.fresh("v"), self._random_type(cols=ONE)
        bound = self.expr(scope, v_type, depth)
        inner = scope.bind(v, v_type)
        types = self._loop_types(t)
        inits = tuple(self.expr(inner, u, depth) for _, u in types)
        bindings = self._loop_bodies(inner, types, depth)
        return Let(v, bound, ForCanonical(v, bindings, inits))

    def gen_zero_init(self, scope: Schema, t: MatrixType, depth: int) -> Expr:
        x, v = self.names.fresh("X"), self.names.fresh("v")
        v_type = self._random_type(cols=ONE)
        shape = self.expr(scope, t, depth)
        bound = self.expr(scope, v_type, depth)
        inner = scope.bind(x, t).bind(v, v_type)
        bindings = self._loop_bodies(inner, [(x, t)], depth)
        return Let(x, shape, Let(v, bound, ForCanonical(v, bindings, ())))

    def gen_counted(self, scope: Schema, t: MatrixType, depth: int) -> Expr:
        driver = self.expr(scope, self._random_type(cols=ONE), depth)
        types = self._loop_types(t)
        inits = tuple(self.expr(scope, u, depth) for _, u in types)
        bindings = self._loop_bodies(scope, types, depth)
        return ForCounted(driver, bindings, inits)

    # scalar expressions

    def literal(self, ring: SemiringId) -> Lit:
        sr = get_semiring(ring)
        payload = self.rng.choice((sr.zero, sr.one, _SAMPLES[ring][-2]))
        return Lit(ring, ScalarValue(ring, payload))

    def scalar(self, ring: SemiringId, params: Sequence[str], depth: int) -> ScalarExpr:
        choice = self.rng.random()
        if depth <= 0 or choice < 0.3:
            if self.rng.random() < 0.8:
                return Param(self.rng.choice(params))
            return self.literal(ring)
        if choice < 0.55:
            return Add(self.scalar(ring, params, depth - 1), self.scalar(ring, params, depth - 1))
        if choice < 0.8:
            return Mul(self.scalar(ring, params, depth - 1), self.scalar(ring, params, depth - 1))
        return Cond(
            Param(self.rng.choice(params)),
            self.literal(ring),
            self.scalar(ring, params, depth - 1),
            self.scalar(ring, params, depth - 1),
        )


@dataclass(frozen=True)
class FailureBundle:
    """Everything needed to reproduce a failing case."""

    seed: int
    index: int
    dialect: Dialect
    stage: str
    message: str
    program: str
    sizes: Dict[str, int]
    matrices: Dict[str, str]

    def render(self) -> str:
        lines = [
            f"case {self.index} (seed {self.seed}, {self.dialect}) failed at {self.stage}:",
            f"  {self.message}",
            "program:",
            self.program.rstrip("\n"),
            "sizes: " + ", ".join(f"{k}={v}" for k, v in sorted(self.sizes.items())),
        ]
        for name, text in sorted(self.matrices.items()):
            lines.append(f"% {name}")
            lines.append(text.rstrip("\n"))
        return "\n".join(lines)

    def as_record(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "index": self.index,
            "dialect": str(self.dialect),
            "stage": self.stage,
            "message": self.message,
            "program": self.program,
            "sizes": dict(sorted(self.sizes.items())),
            "matrices": dict(sorted(self.matrices.items())),
        }


@dataclass(frozen=True)
class CaseResult:
    index: int
    dialect: Dialect
    status: str  # "ok", "skipped" or "failed"
    checks: Tuple[str, ...] = ()
    failure: Optional[FailureBundle] = None

    def as_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "case": self.index,
            "dialect": str(self.dialect),
            "status": self.status,
            "checks": list(self.checks),
        }
        if self.failure is not None:
            record["failure"] = self.failure.as_record()
        return record


@dataclass
class FuzzReport:
    config: FuzzConfig
    results: List[CaseResult] = field(default_factory=list)

    def count(self, status: str) -> int:
        return sum(1 for r in self.results if r.status == status)

    @property
    def failures(self) -> List[FailureBundle]:
        return [r.failure for r in self.results if r.failure is not None]

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        return (
            f"{len(self.results)} cases: {self.count('ok')} ok,"
            f" {self.count('skipped')} skipped, {self.count('failed')} failed"
        )


class _CaseFailure(Exception):
    def __init__(self, stage: str, message: str) -> None:
        super().__init__(message)
        self.stage = stage
        self.message = message


def _dialect_rank(d: Dialect) -> int:
    return list(Dialect).index(d)


def _check_case(
    config: FuzzConfig, schema: Schema, expr: Expr, instance: Instance, dialect: Dialect
) -> Iterator[str]:
    """Run every check on one case, yielding the name of each one passed.

    Raises :class:`_CaseFailure` on the first failing check and
    :class:`EvaluationError` when the program itself cannot be evaluated.
    """
    evaluator = Evaluator(element_limit=config.element_limit)
    text = print_program(schema, expr)
    reparsed_schema, reparsed, _ = parse_program(text)
    if reparsed_schema != schema or reparsed != expr:
        raise _CaseFailure("roundtrip", "printed program parses to a different program")
    yield "roundtrip"

    found = detect_dialect(expr, schema)
    if _dialect_rank(found) > _dialect_rank(dialect):
        raise _CaseFailure("dialect", f"generated for {dialect}, detected {found}")
    t = infer_type(schema, expr)
    yield "typecheck"

    expected = evaluator.evaluate(instance, expr)
    shape = (instance.size(t.rows), instance.size(t.cols))
    if expected.shape != shape or expected.ring is not t.ring:
        raise _CaseFailure(
            "soundness",
            f"evaluated to {expected.rows} x {expected.cols} over {expected.ring},"
            f" typed {t}",
        )
    yield "soundness"

    targets: List[Tuple[Dialect, Optional[bool]]] = [(Dialect.DEC_ML, None), (Dialect.SIFOR_ML, None)]
    if config.encode_all and found not in (Dialect.CORE, Dialect.MUSE_ML):
        targets.append((Dialect.SIFOR_ML, True))
    for target, encode in targets:
        stage = f"lower to {target}" + (" encoded" if encode else "")
        try:
            lowered = lower(expr, schema, target, encode=encode)
            actual = evaluate_lowered(lowered, instance, evaluator)
        except MatlangError as exc:
            raise _CaseFailure(stage, f"{type(exc).__name__}: {exc}") from exc
        cell = first_difference(expected, actual)
        if cell is not None:
            raise _CaseFailure(
                stage,
                f"results differ at cell {cell}: {expected.to_lists()} != {actual.to_lists()}",
            )
        yield stage


def run_case(config: FuzzConfig, index: int) -> CaseResult:
    """Generate and check case ``index`` of ``config``'s run."""
    rng = random.Random(f"{config.seed}:{index}")
    dialect = config.dialects[index % len(config.dialects)]
    generator = ProgramGenerator(rng, dialect, config.max_depth, config.max_loop_depth)
    schema, expr = generator.program()
    instance = generator.instance(config.max_dim)
    checks: List[str] = []
    try:
        for check in _check_case(config, schema, expr, instance, dialect):
            checks.append(check)
    except EvaluationError as exc:
        # the program itself overflows or divides by zero on this instance
        logger.debug("case %d skipped: %s", index, exc)
        return CaseResult(index, dialect, "skipped", tuple(checks))
    except (_CaseFailure, MatlangError) as exc:
        stage = exc.stage if isinstance(exc, _CaseFailure) else "check"
        message = exc.message if isinstance(exc, _CaseFailure) else f"{type(exc).__name__}: {exc}"
        bundle = FailureBundle(
            seed=config.seed,
            index=index,
            dialect=dialect,
            stage=stage,
            message=message,
            program=print_program(schema, expr),
            sizes=dict(instance.sizes),
            matrices={name: print_matrix(m) for name, m in instance.mats.items()},
        )
        logger.warning("case %d failed at %s", index, stage)
        return CaseResult(index, dialect, "failed", tuple(checks), bundle)
    return CaseResult(index, dialect, "ok", tuple(checks))


def _run_indexed(args: Tuple[FuzzConfig, int]) -> CaseResult:
    return run_case(*args)


def run_fuzz(config: FuzzConfig, jobs: int = 1) -> FuzzReport:
    """Run all cases of ``config``; with ``jobs > 1`` on a process pool.

    Results are ordered by case index either way.
    """
    report = FuzzReport(config)
    work = [(config, index) for index in range(config.cases)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            report.results.extend(pool.map(_run_indexed, work, chunksize=8))
    else:
        report.results.extend(_run_indexed(item) for item in work)
    logger.info("fuzz seed %d: %s", config.seed, report.summary())
    return report
