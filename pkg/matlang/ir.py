"""
Shared abstract syntax for the MATLANG family of matrix query languages.

A single expression tree serves every dialect, from plain MATLANG up to
GraphAlg Core. Which constructs a dialect admits is decided separately by
:func:`validate_dialect`, so lowering passes can map programs between
dialects without changing data structures.
"""

import enum
import re
from dataclasses import dataclass
from typing import (
    TYPE_CHECKING,
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Set,
    Tuple,
    Union,
)

if TYPE_CHECKING:  # pragma: no cover
    from .semiring import ScalarValue


class MatlangError(Exception):
    """Base class of every error raised by this package."""


class SemiringId(enum.Enum):
    """The closed set of semirings a matrix may be defined over."""

    BOOL = "bool"
    INT = "int"
    REAL = "real"
    INT_MIN_PLUS = "int_min_plus"
    REAL_MIN_PLUS = "real_min_plus"
    INT_MAX_PLUS = "int_max_plus"
    REAL_MAX_PLUS = "real_max_plus"

    def __str__(self) -> str:
        return self.value


class Dialect(enum.Enum):
    """The six languages, ordered from the smallest to the largest."""

    ML = "ml"
    FOR_ML = "for"
    SIFOR_ML = "sifor"
    DEC_ML = "dec"
    CORE = "core"
    MUSE_ML = "muse"

    def __str__(self) -> str:
        return self.value


SINGLE_RING_DIALECTS = frozenset(
    {Dialect.ML, Dialect.FOR_ML, Dialect.SIFOR_ML, Dialect.DEC_ML}
)

_IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class SizeTerm:
    """A size symbol such as ``a``, or the literal one when ``symbol`` is None."""

    symbol: Optional[str] = None

    def __post_init__(self) -> None:
        if self.symbol is not None and not _IDENTIFIER.match(self.symbol):
            raise ValueError(f"invalid size symbol {self.symbol!r}")

    @property
    def is_one(self) -> bool:
        return self.symbol is None

    def __str__(self) -> str:
        return "1" if self.symbol is None else self.symbol


ONE = SizeTerm()


@dataclass(frozen=True)
class MatrixType:
    rows: SizeTerm
    cols: SizeTerm
    ring: SemiringId

    @property
    def is_vector(self) -> bool:
        return self.cols.is_one

    def with_ring(self, ring: SemiringId) -> "MatrixType":
        return MatrixType(self.rows, self.cols, ring)

    def same_shape(self, other: "MatrixType") -> bool:
        return self.rows == other.rows and self.cols == other.cols

    def __str__(self) -> str:
        return f"{self.rows} x {self.cols} over {self.ring}"


class Schema(Mapping[str, MatrixType]):
    """Immutable map from matrix variable names to their types.

    :meth:`bind` returns an updated copy, replacing any prior binding.
    """

    __slots__ = ("_types",)

    def __init__(self, types: Optional[Mapping[str, MatrixType]] = None) -> None:
        self._types: Dict[str, MatrixType] = dict(types or {})

    def __getitem__(self, name: str) -> MatrixType:
        return self._types[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._types)

    def __len__(self) -> int:
        return len(self._types)

    def __repr__(self) -> str:
        return f"Schema({self._types!r})"

    def bind(self, name: str, type_: MatrixType) -> "Schema":
        types = dict(self._types)
        types[name] = type_
        return Schema(types)

    def bind_all(self, pairs: Iterable[Tuple[str, MatrixType]]) -> "Schema":
        types = dict(self._types)
        types.update(pairs)
        return Schema(types)

    def rings(self) -> Set[SemiringId]:
        return {t.ring for t in self._types.values()}

    def size_symbols(self) -> Set[str]:
        return {
            term.symbol
            for t in self._types.values()
            for term in (t.rows, t.cols)
            if term.symbol is not None
        }


# Scalar expressions: bodies of pointwise functions.


class ScalarExpr:
    __slots__ = ()


@dataclass(frozen=True)
class Param(ScalarExpr):
    name: str


@dataclass(frozen=True)
class Lit(ScalarExpr):
    ring: SemiringId
    value: "ScalarValue"

    def __post_init__(self) -> None:
        if self.value.ring is not self.ring:
            raise ValueError(
                f"literal of ring {self.ring} holds a value of ring {self.value.ring}"
            )


@dataclass(frozen=True)
class Add(ScalarExpr):
    left: ScalarExpr
    right: ScalarExpr


@dataclass(frozen=True)
class Mul(ScalarExpr):
    left: ScalarExpr
    right: ScalarExpr


@dataclass(frozen=True)
class Sub(ScalarExpr):
    left: ScalarExpr
    right: ScalarExpr


@dataclass(frozen=True)
class Div(ScalarExpr):
    left: ScalarExpr
    right: ScalarExpr


@dataclass(frozen=True)
class Eq(ScalarExpr):
    left: ScalarExpr
    right: ScalarExpr


@dataclass(frozen=True)
class Cast(ScalarExpr):
    target: SemiringId
    operand: ScalarExpr


@dataclass(frozen=True)
class Cond(ScalarExpr):
    """``y`` if ``w`` equals ``x``, else ``z``."""

    w: ScalarExpr
    x: ScalarExpr
    y: ScalarExpr
    z: ScalarExpr


@dataclass(frozen=True)
class Enc(ScalarExpr):
    """Encode a value of ``ring`` into the real carrier with infinities."""

    ring: SemiringId
    operand: ScalarExpr


@dataclass(frozen=True)
class Dec(ScalarExpr):
    """Decode an encoded real back into ``ring``."""

    ring: SemiringId
    operand: ScalarExpr


BinaryScalar = Union[Add, Mul, Sub, Div, Eq]
BINARY_SCALARS = (Add, Mul, Sub, Div, Eq)


def scalar_children(se: ScalarExpr) -> Tuple[ScalarExpr, ...]:
    if isinstance(se, BINARY_SCALARS):
        return (se.left, se.right)
    if isinstance(se, (Cast, Enc, Dec)):
        return (se.operand,)
    if isinstance(se, Cond):
        return (se.w, se.x, se.y, se.z)
    return ()


def scalar_params(se: ScalarExpr) -> Set[str]:
    """Names of the parameters ``se`` refers to."""
    if isinstance(se, Param):
        return {se.name}
    found: Set[str] = set()
    for child in scalar_children(se):
        found |= scalar_params(child)
    return found


def iter_scalar(se: ScalarExpr) -> Iterator[ScalarExpr]:
    yield se
    for child in scalar_children(se):
        yield from iter_scalar(child)


@dataclass(frozen=True)
class PointwiseFn:
    """A scalar function applied cell by cell, ``(c1: r1, ...) -> body``."""

    params: Tuple[Tuple[str, SemiringId], ...]
    body: ScalarExpr

    def __post_init__(self) -> None:
        names = [name for name, _ in self.params]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")
        unknown = scalar_params(self.body) - set(names)
        if unknown:
            raise ValueError(f"function body refers to unknown params {sorted(unknown)}")

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def param_rings(self) -> Tuple[SemiringId, ...]:
        return tuple(ring for _, ring in self.params)

    @property
    def is_encoded(self) -> bool:
        return isinstance(self.body, Enc)


# Matrix expressions.


class Expr:
    __slots__ = ()


Binding = Tuple[str, Expr]


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Transpose(Expr):
    operand: Expr


@dataclass(frozen=True)
class Ones(Expr):
    operand: Expr


@dataclass(frozen=True)
class Diag(Expr):
    operand: Expr


@dataclass(frozen=True)
class MatMul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Apply(Expr):
    fn: PointwiseFn
    args: Tuple[Expr, ...]

    def __post_init__(self) -> None:
        if not self.args:
            raise ValueError("apply needs at least one argument")


@dataclass(frozen=True)
class PickAny(Expr):
    operand: Expr


@dataclass(frozen=True)
class Let(Expr):
    name: str
    bound: Expr
    body: Expr


def _check_loop(bindings: Tuple[Binding, ...], inits: Tuple[Expr, ...]) -> None:
    if not bindings:
        raise ValueError("a loop needs at least one binding")
    names = [name for name, _ in bindings]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate loop binding names {names}")
    if len(inits) != len(bindings):
        raise ValueError(
            f"loop has {len(bindings)} bindings but {len(inits)} initializers"
        )


@dataclass(frozen=True)
class ForCanonical(Expr):
    """Loop over the canonical vectors of ``var``'s dimension.

    An empty ``inits`` marks the zero-initialized single-binding loop of
    for-MATLANG; the binding's name must then be in scope to fix its shape.
    """

    var: str
    bindings: Tuple[Binding, ...]
    inits: Tuple[Expr, ...]

    def __post_init__(self) -> None:
        if self.is_zero_init:
            if len(self.bindings) != 1:
                raise ValueError("a zero-initialized loop has exactly one binding")
        else:
            _check_loop(self.bindings, self.inits)
        if self.var in self.names:
            raise ValueError(f"canonical vector {self.var!r} is also a loop binding")

    @property
    def is_zero_init(self) -> bool:
        return not self.inits

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.bindings)


@dataclass(frozen=True)
class ForCounted(Expr):
    """Loop running once per row of ``driver``; no canonical vector in scope."""

    driver: Expr
    bindings: Tuple[Binding, ...]
    inits: Tuple[Expr, ...]

    def __post_init__(self) -> None:
        _check_loop(self.bindings, self.inits)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.bindings)


Loop = Union[ForCanonical, ForCounted]


def children(e: Expr) -> Tuple[Expr, ...]:
    """Direct subexpressions of ``e``, in source order."""
    if isinstance(e, (Transpose, Ones, Diag, PickAny)):
        return (e.operand,)
    if isinstance(e, MatMul):
        return (e.left, e.right)
    if isinstance(e, Apply):
        return e.args
    if isinstance(e, Let):
        return (e.bound, e.body)
    if isinstance(e, ForCanonical):
        return tuple(body for _, body in e.bindings) + e.inits
    if isinstance(e, ForCounted):
        return (e.driver,) + tuple(body for _, body in e.bindings) + e.inits
    return ()


def iter_nodes(e: Expr) -> Iterator[Expr]:
    yield e
    for child in children(e):
        yield from iter_nodes(child)


def free_vars(e: Expr) -> Set[str]:
    """Matrix variables read by ``e`` and not bound inside it.

    >>> sorted(free_vars(Let("X", Var("A"), MatMul(Var("X"), Var("X")))))
    ['A']
    """
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Let):
        return free_vars(e.bound) | (free_vars(e.body) - {e.name})
    if isinstance(e, ForCanonical):
        inner: Set[str] = set()
        for _, body in e.bindings:
            inner |= free_vars(body)
        found = {e.var} | (inner - set(e.names) - {e.var})
        if e.is_zero_init:
            found |= set(e.names)
        for init in e.inits:
            found |= free_vars(init)
        return found
    if isinstance(e, ForCounted):
        inner = set()
        for _, body in e.bindings:
            inner |= free_vars(body)
        found = free_vars(e.driver) | (inner - set(e.names))
        for init in e.inits:
            found |= free_vars(init)
        return found
    found = set()
    for child in children(e):
        found |= free_vars(child)
    return found


def all_names(e: Expr) -> Set[str]:
    """Every matrix variable name read or bound anywhere in ``e``."""
    names: Set[str] = set()
    for node in iter_nodes(e):
        if isinstance(node, Var):
            names.add(node.name)
        elif isinstance(node, Let):
            names.add(node.name)
        elif isinstance(node, ForCanonical):
            names.add(node.var)
            names.update(node.names)
        elif isinstance(node, ForCounted):
            names.update(node.names)
    return names


def fresh_name(avoid: Union[Set[str], FrozenSet[str]], hint: str) -> str:
    """Return ``hint``, or ``hint_k`` with the smallest k making it fresh.

    >>> fresh_name({"v", "V"}, "V")
    'V_1'
    >>> fresh_name(set(), "V")
    'V'
    """
    if hint not in avoid:
        return hint
    k = 1
    while f"{hint}_{k}" in avoid:
        k += 1
    return f"{hint}_{k}"


class NameSupply:
    """Hands out fresh names, remembering every name already taken."""

    __slots__ = ("taken", "issued")

    def __init__(self, taken: Iterable[str] = ()) -> None:
        self.taken: Set[str] = set(taken)
        self.issued: List[str] = []

    def reserve(self, names: Iterable[str]) -> None:
        self.taken.update(names)

    def fresh(self, hint: str) -> str:
        name = fresh_name(self.taken, hint)
        self.taken.add(name)
        self.issued.append(name)
        return name


# Dialect validation.


@dataclass(frozen=True)
class Violation:
    path: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.rule}: {self.message}"


class DialectViolation(MatlangError):
    def __init__(self, dialect: Dialect, violations: List[Violation]) -> None:
        self.dialect = dialect
        self.violations = violations
        lines = "\n".join(f"  {v}" for v in violations)
        super().__init__(f"program is not in {dialect}:\n{lines}")


def output_ring(fn: PointwiseFn) -> SemiringId:
    """The ring a function's body produces, read off its structure.

    Assumes the body is well typed; :mod:`matlang.typecheck` reports errors.
    """
    return _scalar_ring(fn.body, dict(fn.params))


def _scalar_ring(se: ScalarExpr, env: Mapping[str, SemiringId]) -> SemiringId:
    if isinstance(se, Param):
        return env[se.name]
    if isinstance(se, Lit):
        return se.ring
    if isinstance(se, Eq):
        return SemiringId.BOOL
    if isinstance(se, (Add, Mul, Sub, Div)):
        return _scalar_ring(se.left, env)
    if isinstance(se, Cast):
        return se.target
    if isinstance(se, Cond):
        return _scalar_ring(se.y, env)
    if isinstance(se, Enc):
        return SemiringId.REAL
    if isinstance(se, Dec):
        return se.ring
    raise TypeError(f"not a scalar expression: {se!r}")


class _DialectChecker:
    def __init__(self, dialect: Dialect) -> None:
        self.dialect = dialect
        self.single_ring = dialect in SINGLE_RING_DIALECTS
        self.violations: List[Violation] = []
        # ring -> path of first use, for single-ring dialects
        self.rings: Dict[SemiringId, str] = {}

    def report(self, path: str, rule: str, message: str) -> None:
        self.violations.append(Violation(path, rule, message))

    def use_ring(self, ring: SemiringId, path: str) -> None:
        self.rings.setdefault(ring, path)

    def check(self, e: Expr, path: str) -> None:
        d = self.dialect
        if isinstance(e, PickAny) and d not in (
            Dialect.DEC_ML,
            Dialect.MUSE_ML,
            Dialect.CORE,
        ):
            self.report(path, "pickany", f"pickAny not in {d}")
        elif isinstance(e, ForCanonical):
            if d not in (Dialect.FOR_ML, Dialect.SIFOR_ML):
                self.report(path, "canonical-loop", f"canonical loop not in {d}")
            elif d is Dialect.FOR_ML and len(e.bindings) > 1:
                self.report(path, "loop-arity", "simultaneous induction not in for")
            if e.is_zero_init and d is not Dialect.FOR_ML:
                self.report(path, "zero-init", f"zero-initialized loop not in {d}")
        elif isinstance(e, ForCounted) and d not in (
            Dialect.DEC_ML,
            Dialect.MUSE_ML,
            Dialect.CORE,
        ):
            self.report(path, "counted-loop", f"counted loop not in {d}")
        elif isinstance(e, Apply):
            self.check_fn(e.fn, f"{path}.fn")
        for label, child in _labelled_children(e):
            self.check(child, f"{path}.{label}")

    def check_fn(self, fn: PointwiseFn, path: str) -> None:
        if fn.is_encoded:
            self.check_encoded_fn(fn, path)
            return
        if self.single_ring:
            for _, ring in fn.params:
                self.use_ring(ring, path)
            self.use_ring(output_ring(fn), path)
        for node in iter_scalar(fn.body):
            if isinstance(node, (Enc, Dec)):
                self.report(
                    path,
                    "encoded-function",
                    "enc/dec only at the top of an encoded function",
                )
            elif isinstance(node, Cast) and self.single_ring:
                self.report(path, "cast", f"cast not in {self.dialect}")
            elif isinstance(node, Lit) and self.single_ring:
                self.use_ring(node.ring, path)

    def check_encoded_fn(self, fn: PointwiseFn, path: str) -> None:
        if self.dialect is Dialect.CORE:
            self.report(path, "encoded-function", "enc/dec not in core")
            return
        if self.single_ring:
            if any(ring is not SemiringId.REAL for _, ring in fn.params):
                self.report(
                    path,
                    "encoded-function",
                    "encoded function parameters must be real",
                )
            self.use_ring(SemiringId.REAL, path)
        assert isinstance(fn.body, Enc)
        for node in iter_scalar(fn.body.operand):
            if isinstance(node, Enc):
                self.report(path, "encoded-function", "nested enc")


def _labelled_children(e: Expr) -> Iterator[Tuple[str, Expr]]:
    if isinstance(e, (Transpose, Ones, Diag, PickAny)):
        yield "operand", e.operand
    elif isinstance(e, MatMul):
        yield "left", e.left
        yield "right", e.right
    elif isinstance(e, Apply):
        for i, arg in enumerate(e.args):
            yield f"args[{i}]", arg
    elif isinstance(e, Let):
        yield "bound", e.bound
        yield "body", e.body
    elif isinstance(e, (ForCanonical, ForCounted)):
        if isinstance(e, ForCounted):
            yield "driver", e.driver
        for i, (_, body) in enumerate(e.bindings):
            yield f"bindings[{i}]", body
        for i, init in enumerate(e.inits):
            yield f"inits[{i}]", init


def dialect_violations(e: Expr, d: Dialect, s: Schema) -> List[Violation]:
    """Every rule of dialect ``d`` that ``e`` (over schema ``s``) breaks."""
    checker = _DialectChecker(d)
    if checker.single_ring:
        for name, t in s.items():
            checker.use_ring(t.ring, f"schema.{name}")
    checker.check(e, "$")
    if checker.single_ring and len(checker.rings) > 1:
        uses = ", ".join(f"{ring} at {path}" for ring, path in checker.rings.items())
        checker.report("$", "single-ring", f"{d} programs use one semiring, found {uses}")
    return checker.violations


def validate_dialect(e: Expr, d: Dialect, s: Schema) -> None:
    """Raise :class:`DialectViolation` unless ``e`` is a program of ``d``."""
    violations = dialect_violations(e, d, s)
    if violations:
        raise DialectViolation(d, violations)


def is_valid(e: Expr, d: Dialect, s: Schema) -> bool:
    return not dialect_violations(e, d, s)


def detect_dialect(e: Expr, s: Schema) -> Dialect:
    """The smallest dialect whose rules ``e`` satisfies."""
    for d in Dialect:
        if is_valid(e, d, s):
            return d
    raise DialectViolation(Dialect.MUSE_ML, dialect_violations(e, Dialect.MUSE_ML, s))
