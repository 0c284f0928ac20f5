"""
Operational semantics: evaluating expressions against an instance.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import (
    Any,
    Callable,
    Dict,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

from .ir import (
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
    MatlangError,
    MatMul,
    Mul,
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
from .semiring import (
    EncodedValue,
    EvaluationError,
    Payload,
    ScalarValue,
    cast_payload,
    dec_payload,
    div_payload,
    enc_payload,
    get_semiring,
    ring_domain,
    sub_payload,
)
from .typecheck import check_function

logger = logging.getLogger(__name__)

DEFAULT_ELEMENT_LIMIT = 10**6
REAL_REL_TOL = 1e-9

Row = Tuple[Payload, ...]
Tracer = Callable[[Expr, int, Mapping[str, "Matrix"]], None]


class InstanceError(MatlangError):
    """The instance does not conform to the schema or expression."""


@dataclass(frozen=True)
class Matrix:
    """Dense row-major matrix of raw payloads over one ring."""

    rows: int
    cols: int
    ring: SemiringId
    data: Tuple[Row, ...]

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"matrix dimensions must be positive, got {self.rows} x {self.cols}")
        if len(self.data) != self.rows or any(len(row) != self.cols for row in self.data):
            raise ValueError(f"matrix data does not have shape {self.rows} x {self.cols}")

    @classmethod
    def from_rows(cls, ring: SemiringId, rows: Sequence[Sequence[Any]]) -> "Matrix":
        """Build a matrix from nested rows, checking every value's carrier.

        >>> Matrix.from_rows(SemiringId.INT, [[1, 2]]).shape
        (1, 2)
        """
        data = tuple(
            tuple(ScalarValue(ring, value).payload for value in row) for row in rows
        )
        return cls(len(data), len(data[0]) if data else 0, ring, data)

    @classmethod
    def filled(cls, ring: SemiringId, rows: int, cols: int, payload: Payload) -> "Matrix":
        row = (payload,) * cols
        return cls(rows, cols, ring, (row,) * rows)

    @classmethod
    def zeros(cls, ring: SemiringId, rows: int, cols: int) -> "Matrix":
        return cls.filled(ring, rows, cols, get_semiring(ring).zero)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    def get(self, i: int, j: int) -> ScalarValue:
        """The entry at 0-based position ``(i, j)``."""
        payload = self.data[i][j]
        if self.ring is SemiringId.REAL and isinstance(payload, float) and math.isinf(payload):
            return EncodedValue(self.ring, payload)
        return ScalarValue(self.ring, payload)

    def to_lists(self) -> List[List[Payload]]:
        return [list(row) for row in self.data]

    def column(self) -> List[Payload]:
        """Entries of a column vector."""
        if self.cols != 1:
            raise ValueError(f"not a column vector: {self.rows} x {self.cols}")
        return [row[0] for row in self.data]

    def transpose(self) -> "Matrix":
        return Matrix(self.cols, self.rows, self.ring, tuple(zip(*self.data)))

    def nonzero(self) -> List[Tuple[int, int, Payload]]:
        """Nonzero entries as 1-based ``(row, col, payload)`` in row-major order."""
        z = get_semiring(self.ring).zero
        return [
            (i + 1, j + 1, value)
            for i, row in enumerate(self.data)
            for j, value in enumerate(row)
            if value != z
        ]


class Instance:
    """Dimensions for size symbols plus matrices for variables."""

    __slots__ = ("sizes", "mats")

    def __init__(self, sizes: Mapping[str, int], mats: Mapping[str, Matrix]) -> None:
        for symbol, n in sizes.items():
            if n < 1:
                raise InstanceError(f"size {symbol} must be positive, got {n}")
        self.sizes: Dict[str, int] = dict(sizes)
        self.mats: Dict[str, Matrix] = dict(mats)

    def __repr__(self) -> str:
        return f"Instance(sizes={self.sizes!r}, mats={sorted(self.mats)!r})"

    @classmethod
    def from_matrices(
        cls,
        schema: Schema,
        mats: Mapping[str, Matrix],
        sizes: Optional[Mapping[str, int]] = None,
    ) -> "Instance":
        """Instance whose sizes are read off the matrices, then checked."""
        known: Dict[str, int] = dict(sizes or {})
        for name, t in schema.items():
            if name not in mats:
                continue
            for term, n in ((t.rows, mats[name].rows), (t.cols, mats[name].cols)):
                if term.symbol is not None:
                    known.setdefault(term.symbol, n)
        instance = cls(known, mats)
        instance.check(schema)
        return instance

    def size(self, term: SizeTerm) -> int:
        if term.symbol is None:
            return 1
        try:
            return self.sizes[term.symbol]
        except KeyError:
            raise InstanceError(f"no dimension given for size symbol {term.symbol}") from None

    def check(self, schema: Schema) -> None:
        """Raise :class:`InstanceError` unless every schema variable conforms."""
        for name, t in schema.items():
            if name not in self.mats:
                raise InstanceError(f"no matrix bound to {name}")
            m = self.mats[name]
            expected = (self.size(t.rows), self.size(t.cols))
            if m.shape != expected:
                raise InstanceError(
                    f"{name} is {m.rows} x {m.cols}, expected {expected[0]} x {expected[1]}"
                    f" for {t}"
                )
            if m.ring is not t.ring:
                raise InstanceError(f"{name} is over {m.ring}, expected {t.ring}")

    def bind(self, name: str, m: Matrix) -> "Instance":
        mats = dict(self.mats)
        mats[name] = m
        return Instance(self.sizes, mats)


def canonical_vector(n: int, k: int, ring: SemiringId) -> Matrix:
    """The ``n x 1`` vector with one at 1-based position ``k``.

    >>> canonical_vector(3, 2, SemiringId.BOOL).column()
    [False, True, False]
    """
    if not 1 <= k <= n:
        raise ValueError(f"canonical vector index {k} out of range 1..{n}")
    sr = get_semiring(ring)
    return Matrix(n, 1, ring, tuple((sr.one if i == k else sr.zero,) for i in range(1, n + 1)))


def pick_any(a: Matrix) -> Matrix:
    """Keep ``a[i][j]`` only while every earlier entry of row ``i`` is zero."""
    z = get_semiring(a.ring).zero
    rows = []
    for row in a.data:
        out = []
        seen = False
        for value in row:
            out.append(z if seen else value)
            seen = seen or value != z
        rows.append(tuple(out))
    return Matrix(a.rows, a.cols, a.ring, tuple(rows))


# Pointwise functions are compiled once into closures over raw payloads.

Compiled = Callable[[Sequence[Payload]], Payload]


def _compile(se: ScalarExpr, rings: Mapping[str, SemiringId], index: Mapping[str, int]) -> Tuple[Compiled, SemiringId]:
    if isinstance(se, Param):
        i = index[se.name]
        return (lambda xs: xs[i]), rings[se.name]
    if isinstance(se, Lit):
        value = se.value.payload
        return (lambda xs: value), se.ring
    if isinstance(se, Cast):
        operand, src = _compile(se.operand, rings, index)
        dst = se.target
        return (lambda xs: cast_payload(src, dst, operand(xs))), dst
    if isinstance(se, Enc):
        operand, ring = _compile(se.operand, rings, index)
        return (lambda xs: enc_payload(ring, operand(xs))), SemiringId.REAL
    if isinstance(se, Dec):
        operand, _ = _compile(se.operand, rings, index)
        target = se.ring
        return (lambda xs: dec_payload(target, operand(xs))), target
    if isinstance(se, Cond):
        w, _ = _compile(se.w, rings, index)
        x, _ = _compile(se.x, rings, index)
        y, ring = _compile(se.y, rings, index)
        z, _ = _compile(se.z, rings, index)
        return (lambda xs: y(xs) if w(xs) == x(xs) else z(xs)), ring
    left, ring = _compile(se.left, rings, index)  # type: ignore[attr-defined]
    right, _ = _compile(se.right, rings, index)  # type: ignore[attr-defined]
    if isinstance(se, Eq):
        return (lambda xs: left(xs) == right(xs)), SemiringId.BOOL
    if isinstance(se, Add):
        add = get_semiring(ring).add
        return (lambda xs: add(left(xs), right(xs))), ring
    if isinstance(se, Mul):
        mul = get_semiring(ring).mul
        return (lambda xs: mul(left(xs), right(xs))), ring
    if isinstance(se, Sub):
        return (lambda xs: sub_payload(ring, left(xs), right(xs))), ring
    if isinstance(se, Div):
        return (lambda xs: div_payload(ring, left(xs), right(xs))), ring
    raise TypeError(f"not a scalar expression: {se!r}")


@lru_cache(maxsize=1024)
def compile_fn(fn: PointwiseFn) -> Tuple[Compiled, SemiringId]:
    """Closure computing ``fn`` on a tuple of argument payloads, and its ring."""
    check_function(fn)
    index = {name: i for i, (name, _) in enumerate(fn.params)}
    return _compile(fn.body, dict(fn.params), index)


def eval_scalar(env: Mapping[str, ScalarValue], se: ScalarExpr) -> ScalarValue:
    """Evaluate a scalar expression with its parameters bound to values."""
    names = sorted(env)
    fn = PointwiseFn(tuple((name, env[name].ring) for name in names), se)
    compiled, ring = compile_fn(fn)
    payload = compiled(tuple(env[name].payload for name in names))
    if ring is SemiringId.REAL and math.isinf(payload):
        return EncodedValue(ring, payload)
    return ScalarValue(ring, payload)


def eval_pointwise(fn: PointwiseFn, args: Sequence[Matrix]) -> Matrix:
    """Apply ``fn`` to each cell of the equally shaped ``args``."""
    if len(args) != fn.arity:
        raise EvaluationError(f"function of arity {fn.arity} applied to {len(args)} matrices")
    first = args[0]
    for arg, (name, ring) in zip(args, fn.params):
        if arg.shape != first.shape:
            raise InstanceError(
                f"pointwise arguments differ in shape: {first.rows} x {first.cols}"
                f" and {arg.rows} x {arg.cols}"
            )
        if arg.ring is not ring:
            raise EvaluationError(f"parameter {name} expects {ring}, got {arg.ring}")
    compiled, ring = compile_fn(fn)
    rows = []
    for i, cells in enumerate(zip(*(arg.data for arg in args))):
        out = []
        for j, xs in enumerate(zip(*cells)):
            try:
                out.append(compiled(xs))
            except EvaluationError as exc:
                raise EvaluationError(str(exc), cell=(i + 1, j + 1)) from exc
        rows.append(tuple(out))
    return Matrix(first.rows, first.cols, ring, tuple(rows))


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Semiring product; zero terms are skipped since zero absorbs."""
    if a.cols != b.rows:
        raise InstanceError(f"cannot multiply {a.rows} x {a.cols} by {b.rows} x {b.cols}")
    if a.ring is not b.ring:
        raise EvaluationError(f"product of {a.ring} and {b.ring} matrices")
    sr = get_semiring(a.ring)
    add, mul, z = sr.add, sr.mul, sr.zero
    columns = list(zip(*b.data))
    rows = []
    for arow in a.data:
        out = []
        for bcol in columns:
            acc = z
            for x, y in zip(arow, bcol):
                if x != z and y != z:
                    acc = add(acc, mul(x, y))
            out.append(acc)
        rows.append(tuple(out))
    return Matrix(a.rows, b.cols, a.ring, tuple(rows))


class Evaluator:
    """Evaluates expressions; one ``eval_<node>`` method per expression node.

    :param element_limit: largest number of cells any intermediate matrix may have
    :param tracer: called as ``tracer(loop, k, bindings)`` with the initial
        loop state (``k == 0``) and after every iteration ``k``
    """

    def __init__(
        self,
        element_limit: int = DEFAULT_ELEMENT_LIMIT,
        tracer: Optional[Tracer] = None,
    ) -> None:
        self.element_limit = element_limit
        self.tracer = tracer

    def evaluate(self, instance: Instance, e: Expr) -> Matrix:
        return self.eval(instance.mats, e)

    def eval(self, env: Mapping[str, Matrix], e: Expr) -> Matrix:
        method = getattr(self, "eval_" + type(e).__name__.lower())
        result: Matrix = method(env, e)
        if result.rows * result.cols > self.element_limit:
            raise EvaluationError(
                f"{result.rows} x {result.cols} result exceeds the limit of"
                f" {self.element_limit} elements"
            )
        return result

    def eval_var(self, env: Mapping[str, Matrix], e: Var) -> Matrix:
        try:
            return env[e.name]
        except KeyError:
            raise InstanceError(f"no matrix bound to {e.name}") from None

    def eval_transpose(self, env: Mapping[str, Matrix], e: Transpose) -> Matrix:
        return self.eval(env, e.operand).transpose()

    def eval_ones(self, env: Mapping[str, Matrix], e: Ones) -> Matrix:
        m = self.eval(env, e.operand)
        return Matrix.filled(m.ring, m.rows, 1, get_semiring(m.ring).one)

    def eval_diag(self, env: Mapping[str, Matrix], e: Diag) -> Matrix:
        m = self.eval(env, e.operand)
        if m.cols != 1:
            raise InstanceError(f"diag of a {m.rows} x {m.cols} matrix")
        self._check_size(m.rows * m.rows)
        z = get_semiring(m.ring).zero
        rows = tuple(
            tuple(m.data[i][0] if i == j else z for j in range(m.rows)) for i in range(m.rows)
        )
        return Matrix(m.rows, m.rows, m.ring, rows)

    def eval_matmul(self, env: Mapping[str, Matrix], e: MatMul) -> Matrix:
        a = self.eval(env, e.left)
        b = self.eval(env, e.right)
        self._check_size(a.rows * b.cols)
        return matmul(a, b)

    def eval_apply(self, env: Mapping[str, Matrix], e: Apply) -> Matrix:
        return eval_pointwise(e.fn, [self.eval(env, arg) for arg in e.args])

    def eval_pickany(self, env: Mapping[str, Matrix], e: PickAny) -> Matrix:
        return pick_any(self.eval(env, e.operand))

    def eval_let(self, env: Mapping[str, Matrix], e: Let) -> Matrix:
        scope = dict(env)
        scope[e.name] = self.eval(env, e.bound)
        return self.eval(scope, e.body)

    def eval_forcanonical(self, env: Mapping[str, Matrix], e: ForCanonical) -> Matrix:
        vector = self.eval_var(env, Var(e.var))
        if vector.cols != 1:
            raise InstanceError(f"canonical loop over {e.var}, a {vector.rows} x {vector.cols} matrix")
        if e.is_zero_init:
            (name, _), = e.bindings
            shape = self.eval_var(env, Var(name))
            state = {name: Matrix.zeros(shape.ring, shape.rows, shape.cols)}
        else:
            state = self._initial_state(env, e.names, e.inits)
        self._trace(e, 0, state)
        n = vector.rows
        logger.debug("canonical loop over %s: %d iterations", e.var, n)
        for k in range(1, n + 1):
            scope = dict(env)
            scope.update(state)
            scope[e.var] = canonical_vector(n, k, vector.ring)
            state = {name: self.eval(scope, body) for name, body in e.bindings}
            self._trace(e, k, state)
        return state[e.bindings[0][0]]

    def eval_forcounted(self, env: Mapping[str, Matrix], e: ForCounted) -> Matrix:
        driver = self.eval(env, e.driver)
        if driver.cols != 1:
            raise InstanceError(f"loop driver is {driver.rows} x {driver.cols}, not a vector")
        state = self._initial_state(env, e.names, e.inits)
        self._trace(e, 0, state)
        logger.debug("counted loop: %d iterations", driver.rows)
        for k in range(1, driver.rows + 1):
            scope = dict(env)
            scope.update(state)
            state = {name: self.eval(scope, body) for name, body in e.bindings}
            self._trace(e, k, state)
        return state[e.bindings[0][0]]

    def _initial_state(
        self, env: Mapping[str, Matrix], names: Sequence[str], inits: Sequence[Expr]
    ) -> Dict[str, Matrix]:
        return {name: self.eval(env, init) for name, init in zip(names, inits)}

    def _trace(self, loop: Expr, k: int, state: Mapping[str, Matrix]) -> None:
        if self.tracer is not None:
            self.tracer(loop, k, state)

    def _check_size(self, cells: int) -> None:
        if cells > self.element_limit:
            raise EvaluationError(f"result of {cells} elements exceeds the limit of {self.element_limit}")


def evaluate(instance: Instance, e: Expr, **kwargs: Any) -> Matrix:
    """Evaluate ``e`` on ``instance``; keyword arguments configure :class:`Evaluator`."""
    return Evaluator(**kwargs).evaluate(instance, e)


# Encoding whole matrices for the multi-semiring lowering.


def encode_matrix(m: Matrix) -> Matrix:
    if m.ring is SemiringId.REAL:
        return m
    rows = tuple(tuple(enc_payload(m.ring, x) for x in row) for row in m.data)
    return Matrix(m.rows, m.cols, SemiringId.REAL, rows)


def decode_matrix(ring: SemiringId, m: Matrix) -> Matrix:
    if m.ring is not SemiringId.REAL:
        raise ValueError(f"cannot decode a {m.ring} matrix")
    rows = tuple(tuple(dec_payload(ring, float(x)) for x in row) for row in m.data)
    return Matrix(m.rows, m.cols, ring, rows)


def encode_instance(instance: Instance) -> Instance:
    return Instance(instance.sizes, {name: encode_matrix(m) for name, m in instance.mats.items()})


def first_difference(a: Matrix, b: Matrix, rel_tol: float = REAL_REL_TOL) -> Optional[Tuple[int, int]]:
    """1-based position of the first cell where ``a`` and ``b`` disagree.

    Reals compare with relative tolerance ``rel_tol``; every other ring exactly.
    ``(0, 0)`` stands for a shape or ring mismatch.
    """
    if a.shape != b.shape or a.ring is not b.ring:
        return (0, 0)
    tolerant = ring_domain(a.ring) == "R"
    for i, (arow, brow) in enumerate(zip(a.data, b.data)):
        for j, (x, y) in enumerate(zip(arow, brow)):
            same = math.isclose(x, y, rel_tol=rel_tol) if tolerant else x == y
            if not same:
                return (i + 1, j + 1)
    return None


def matrices_agree(a: Matrix, b: Matrix, rel_tol: float = REAL_REL_TOL) -> bool:
    return first_difference(a, b, rel_tol) is None
