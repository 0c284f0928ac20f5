"""
Concrete syntax of programs and the matrix file format.

A program file declares its schema and then gives one expression::

    % weakly connected components
    matrix A : a x a over bool;
    in for { X := pickany(X + (A * X)) } (ones(A), diag(ones(A)))

``e + f`` and ``e - f`` are shorthand for pointwise addition and
subtraction in ``e``'s ring; the printer always writes the ``apply`` form.

A matrix file has a ``matrix ROWS COLS RING`` header followed by
``ROW COL VALUE`` lines with 1-based indices; missing entries are zero.
"""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from lark import Lark, Token, Tree
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken

from .evaluate import Matrix
from .ir import (
    ONE,
    Add,
    Apply,
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
    SizeTerm,
    Sub,
    Transpose,
    Var,
    detect_dialect,
)
from .macros import binary_fn, monus_fn
from .semiring import EncodedValue, ScalarValue, format_token, get_semiring, parse_token
from .typecheck import infer_type, loop_step_schema

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

RESERVED = frozenset(
    {
        "matrix", "x", "over", "in", "let", "for", "ones", "diag", "pickany",
        "apply", "cast", "cond", "enc", "dec",
    }
)  # fmt: skip

PROGRAM_GRAMMAR = r"""
start: decl* "in" expr

decl: "matrix" NAME ":" size "x" size "over" NAME ";"

size: NAME -> size_symbol
    | "1"  -> size_one

?expr: "let" NAME "=" expr "in" expr -> let
     | sum

?sum: sum "+" product -> mat_add
    | sum "-" product -> mat_sub
    | product

?product: product "*" postfix -> matmul
        | postfix

?postfix: postfix "'" -> transpose
        | atom

?atom: NAME -> var
     | "ones" "(" expr ")" -> ones
     | "diag" "(" expr ")" -> diag
     | "pickany" "(" expr ")" -> pickany
     | "apply" "[" function "]" "(" exprs ")" -> apply
     | "for" "[" NAME "]" "{" bindings "}" "(" inits ")" -> for_canonical
     | "for" "{" bindings "}" "(" exprs ")" -> for_counted
     | "(" expr ")"

exprs: expr ("," expr)*
inits: [expr ("," expr)*]
bindings: binding (";" binding)* ";"?
binding: NAME ":=" expr

function: "(" params ")" "->" sexpr
params: [param ("," param)*]
param: NAME ":" NAME

?sexpr: sexpr "==" ssum -> s_eq
      | ssum

?ssum: ssum "+" sprod -> s_add
     | ssum "-" sprod -> s_sub
     | sprod

?sprod: sprod "*" satom -> s_mul
      | sprod "/" satom -> s_div
      | satom

?satom: NAME -> s_param
      | NAME "(" VALUE ")" -> s_lit
      | "cast" "(" NAME "," sexpr ")" -> s_cast
      | "cond" "(" sexpr "," sexpr "," sexpr "," sexpr ")" -> s_cond
      | "enc" "(" NAME "," sexpr ")" -> s_enc
      | "dec" "(" NAME "," sexpr ")" -> s_dec
      | "(" sexpr ")"

NAME: /[A-Za-z_][A-Za-z0-9_]*/
VALUE: /-?inf|true|false|[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?/
COMMENT: /%[^\n]*/

%import common.WS
%ignore WS
%ignore COMMENT
"""


class ProgramSyntaxError(MatlangError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class MatrixFormatError(MatlangError):
    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@lru_cache(maxsize=None)
def _parser() -> Lark:
    return Lark(PROGRAM_GRAMMAR, parser="lalr", propagate_positions=True)


def _syntax_error(message: str, node: Union[Tree, Token]) -> ProgramSyntaxError:
    if isinstance(node, Token):
        return ProgramSyntaxError(message, node.line, node.column)
    meta = node.meta
    return ProgramSyntaxError(message, getattr(meta, "line", None), getattr(meta, "column", None))


def _ring(token: Token) -> SemiringId:
    try:
        return SemiringId(str(token))
    except ValueError:
        raise _syntax_error(f"unknown ring {str(token)!r}", token) from None


class _ProgramBuilder:
    """Turns the parse tree into IR, typing subexpressions as it goes so
    that ``+``/``-`` shorthand picks the right ring."""

    def schema(self, decls: List[Tree]) -> Schema:
        types: Dict[str, MatrixType] = {}
        for decl in decls:
            name, rows, cols, ring = decl.children
            if str(name) in types:
                raise _syntax_error(f"matrix {name} declared twice", name)
            types[str(name)] = MatrixType(self.size(rows), self.size(cols), _ring(ring))
        return Schema(types)

    @staticmethod
    def size(tree: Tree) -> SizeTerm:
        if tree.data == "size_one":
            return ONE
        return SizeTerm(str(tree.children[0]))

    def expr(self, scope: Schema, tree: Tree) -> Expr:
        method: Callable[[Schema, Tree], Expr] = getattr(self, "build_" + str(tree.data))
        return method(scope, tree)

    def build_var(self, scope: Schema, tree: Tree) -> Expr:
        return Var(str(tree.children[0]))

    def build_let(self, scope: Schema, tree: Tree) -> Expr:
        name, bound_tree, body_tree = tree.children
        bound = self.expr(scope, bound_tree)
        inner = scope.bind(str(name), infer_type(scope, bound))
        return Let(str(name), bound, self.expr(inner, body_tree))

    def _pointwise(self, scope: Schema, tree: Tree, make: Callable[[SemiringId], PointwiseFn]) -> Expr:
        left = self.expr(scope, tree.children[0])
        right = self.expr(scope, tree.children[1])
        return Apply(make(infer_type(scope, left).ring), (left, right))

    def build_mat_add(self, scope: Schema, tree: Tree) -> Expr:
        return self._pointwise(scope, tree, lambda ring: binary_fn(Add, ring))

    def build_mat_sub(self, scope: Schema, tree: Tree) -> Expr:
        return self._pointwise(scope, tree, monus_fn)

    def build_matmul(self, scope: Schema, tree: Tree) -> Expr:
        left, right = (self.expr(scope, child) for child in tree.children)
        return MatMul(left, right)

    def build_transpose(self, scope: Schema, tree: Tree) -> Expr:
        return Transpose(self.expr(scope, tree.children[0]))

    def build_ones(self, scope: Schema, tree: Tree) -> Expr:
        return Ones(self.expr(scope, tree.children[0]))

    def build_diag(self, scope: Schema, tree: Tree) -> Expr:
        return Diag(self.expr(scope, tree.children[0]))

    def build_pickany(self, scope: Schema, tree: Tree) -> Expr:
        return PickAny(self.expr(scope, tree.children[0]))

    def build_apply(self, scope: Schema, tree: Tree) -> Expr:
        fn_tree, args_tree = tree.children
        fn = self.function(fn_tree)
        args = tuple(self.expr(scope, arg) for arg in args_tree.children)
        if len(args) != fn.arity:
            raise _syntax_error(
                f"function of {fn.arity} parameters applied to {len(args)} arguments", tree
            )
        return Apply(fn, args)

    def _bindings(self, tree: Tree) -> List[Tuple[str, Tree]]:
        return [(str(b.children[0]), b.children[1]) for b in tree.children]

    def _loop_bodies(
        self, scope: Schema, pairs: List[Tuple[str, Tree]], inits: Tuple[Expr, ...]
    ) -> Tuple[Tuple[str, Expr], ...]:
        names = tuple((name, Var(name)) for name, _ in pairs)
        inner = loop_step_schema(scope, names, inits)
        return tuple((name, self.expr(inner, body)) for name, body in pairs)

    def build_for_canonical(self, scope: Schema, tree: Tree) -> Expr:
        var, bindings_tree, inits_tree = tree.children
        pairs = self._bindings(bindings_tree)
        inits = tuple(self.expr(scope, init) for init in inits_tree.children if init is not None)
        if inits and len(inits) != len(pairs):
            raise _syntax_error(
                f"loop has {len(pairs)} bindings but {len(inits)} initializers", tree
            )
        if not inits and len(pairs) != 1:
            raise _syntax_error("a zero-initialized loop has exactly one binding", tree)
        bindings = self._loop_bodies(scope, pairs, inits)
        try:
            return ForCanonical(str(var), bindings, inits)
        except ValueError as exc:
            raise _syntax_error(str(exc), tree) from None

    def build_for_counted(self, scope: Schema, tree: Tree) -> Expr:
        bindings_tree, args_tree = tree.children
        pairs = self._bindings(bindings_tree)
        args = [self.expr(scope, arg) for arg in args_tree.children]
        if len(args) != len(pairs) + 1:
            raise _syntax_error(
                f"counted loop with {len(pairs)} bindings needs a driver and"
                f" {len(pairs)} initializers, got {len(args)} arguments",
                tree,
            )
        driver, inits = args[0], tuple(args[1:])
        bindings = self._loop_bodies(scope, pairs, inits)
        try:
            return ForCounted(driver, bindings, inits)
        except ValueError as exc:
            raise _syntax_error(str(exc), tree) from None

    def function(self, tree: Tree) -> PointwiseFn:
        params_tree, body_tree = tree.children
        params = tuple(
            (str(p.children[0]), _ring(p.children[1]))
            for p in params_tree.children
            if p is not None
        )
        try:
            return PointwiseFn(params, self.scalar(body_tree))
        except ValueError as exc:
            raise _syntax_error(str(exc), tree) from None

    _BINARY = {"s_eq": Eq, "s_add": Add, "s_sub": Sub, "s_mul": Mul, "s_div": Div}

    def scalar(self, tree: Tree) -> ScalarExpr:
        kind = str(tree.data)
        if kind in self._BINARY:
            left, right = (self.scalar(child) for child in tree.children)
            return self._BINARY[kind](left, right)  # type: ignore[abstract]
        if kind == "s_param":
            return Param(str(tree.children[0]))
        if kind == "s_lit":
            ring_token, value = tree.children
            ring = _ring(ring_token)
            if ring is SemiringId.REAL and str(value) in ("inf", "-inf"):
                return Lit(ring, EncodedValue(ring, float(str(value))))
            try:
                return Lit(ring, ScalarValue(ring, parse_token(ring, str(value))))
            except ValueError as exc:
                raise _syntax_error(str(exc), value) from None
        if kind == "s_cond":
            w, x, y, z = (self.scalar(child) for child in tree.children)
            return Cond(w, x, y, z)
        ring_token, operand = tree.children
        ring = _ring(ring_token)
        wrap = {"s_cast": Cast, "s_enc": Enc, "s_dec": Dec}[kind]
        return wrap(ring, self.scalar(operand))  # type: ignore[abstract]


def parse_program(text: str) -> Tuple[Schema, Expr, Dialect]:
    """Parse a program file into its schema, expression and dialect."""
    try:
        tree = _parser().parse(text)
    except UnexpectedEOF as exc:
        raise ProgramSyntaxError("unexpected end of input", exc.line, exc.column) from None
    except UnexpectedToken as exc:
        if exc.token.type == "$END":
            raise ProgramSyntaxError(
                "unexpected end of input", exc.line, exc.column
            ) from None
        raise ProgramSyntaxError(
            f"unexpected {exc.token!s}", exc.line, exc.column
        ) from None
    except UnexpectedCharacters as exc:
        raise ProgramSyntaxError(
            f"unexpected character {exc.char!r}", exc.line, exc.column
        ) from None
    except UnexpectedInput as exc:  # pragma: no cover
        raise ProgramSyntaxError(str(exc), exc.line, exc.column) from None
    builder = _ProgramBuilder()
    *decls, body = tree.children
    schema = builder.schema(decls)
    expr = builder.expr(schema, body)
    return schema, expr, detect_dialect(expr, schema)


def read_program(path: PathLike) -> Tuple[Schema, Expr, Dialect]:
    return parse_program(Path(path).read_text(encoding="utf-8"))


# Printing.


def _name(name: str) -> str:
    if name in RESERVED:
        raise ValueError(f"{name!r} is a reserved word")
    return name


_SCALAR_LEVEL = {Eq: 0, Add: 1, Sub: 1, Mul: 2, Div: 2}
_SCALAR_OP = {Eq: "==", Add: "+", Sub: "-", Mul: "*", Div: "/"}


def print_scalar(se: ScalarExpr, level: int = 0) -> str:
    kind = type(se)
    if kind in _SCALAR_LEVEL:
        own = _SCALAR_LEVEL[kind]
        left = print_scalar(se.left, own)  # type: ignore[attr-defined]
        right = print_scalar(se.right, own + 1)  # type: ignore[attr-defined]
        text = f"{left} {_SCALAR_OP[kind]} {right}"
        return f"({text})" if own < level else text
    if isinstance(se, Param):
        return _name(se.name)
    if isinstance(se, Lit):
        return f"{se.ring}({format_token(se.ring, se.value.payload)})"
    if isinstance(se, Cond):
        parts = ", ".join(print_scalar(part) for part in (se.w, se.x, se.y, se.z))
        return f"cond({parts})"
    if isinstance(se, Cast):
        return f"cast({se.target}, {print_scalar(se.operand)})"
    if isinstance(se, Enc):
        return f"enc({se.ring}, {print_scalar(se.operand)})"
    if isinstance(se, Dec):
        return f"dec({se.ring}, {print_scalar(se.operand)})"
    raise TypeError(f"not a scalar expression: {se!r}")


def print_function(fn: PointwiseFn) -> str:
    params = ", ".join(f"{_name(name)}: {ring}" for name, ring in fn.params)
    return f"({params}) -> {print_scalar(fn.body)}"


# precedence levels of matrix expressions
_LET, _PRODUCT, _POSTFIX, _ATOM = 0, 2, 3, 4


class _Printer:
    def __init__(self, indent: str = "  ") -> None:
        self.indent = indent

    def show(self, e: Expr, level: int = _LET, depth: int = 0) -> str:
        text, own = self.render(e, depth)
        return f"({text})" if own < level else text

    def render(self, e: Expr, depth: int) -> Tuple[str, int]:
        pad = "\n" + self.indent * (depth + 1)
        if isinstance(e, Var):
            return _name(e.name), _ATOM
        if isinstance(e, Transpose):
            return self.show(e.operand, _POSTFIX, depth) + "'", _POSTFIX
        if isinstance(e, MatMul):
            left = self.show(e.left, _PRODUCT, depth)
            right = self.show(e.right, _POSTFIX, depth)
            return f"{left} * {right}", _PRODUCT
        if isinstance(e, (Ones, Diag, PickAny)):
            keyword = type(e).__name__.lower()
            return f"{keyword}({self.show(e.operand, _LET, depth)})", _ATOM
        if isinstance(e, Apply):
            args = ", ".join(self.show(arg, _LET, depth) for arg in e.args)
            return f"apply[{print_function(e.fn)}]({args})", _ATOM
        if isinstance(e, Let):
            bound = self.show(e.bound, _LET, depth + 1)
            body = self.show(e.body, _LET, depth)
            pad = "\n" + self.indent * depth
            return f"let {_name(e.name)} = {bound} in{pad}{body}", _LET
        if isinstance(e, (ForCanonical, ForCounted)):
            bindings = ";".join(
                f"{pad}{_name(name)} := {self.show(body, _LET, depth + 1)}"
                for name, body in e.bindings
            )
            args: Tuple[Expr, ...] = e.inits
            head = "for"
            if isinstance(e, ForCanonical):
                head = f"for [{_name(e.var)}]"
            else:
                args = (e.driver,) + e.inits
            close = "\n" + self.indent * depth
            arg_text = ", ".join(self.show(arg, _LET, depth) for arg in args)
            return f"{head} {{{bindings}{close}}} ({arg_text})", _ATOM
        raise TypeError(f"not an expression: {e!r}")


def print_program(s: Schema, e: Expr) -> str:
    """Program text that parses back to ``s`` and ``e``."""
    lines = [
        f"matrix {_name(name)} : {t.rows} x {t.cols} over {t.ring};" for name, t in s.items()
    ]
    lines.append("in " + _Printer().show(e))
    return "\n".join(lines) + "\n"


def print_expr(e: Expr) -> str:
    return _Printer().show(e)


# Matrix files.


def _int_field(text: str, what: str, line: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise MatrixFormatError(f"{what} {text!r} is not an integer", line) from None
    return value


def parse_matrix(text: str) -> Matrix:
    """Parse a matrix file.

    >>> parse_matrix("matrix 2 2 int_min_plus\\n1 1 0\\n2 1 3\\n2 2 0\\n").to_lists()
    [[0, inf], [3, 0]]
    """
    ring: Optional[SemiringId] = None
    rows = cols = 0
    cells: List[List[object]] = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        fields = line.split()
        if ring is None:
            if len(fields) != 4 or fields[0] != "matrix":
                raise MatrixFormatError("expected header 'matrix ROWS COLS RING'", lineno)
            rows = _int_field(fields[1], "row count", lineno)
            cols = _int_field(fields[2], "column count", lineno)
            if rows < 1 or cols < 1:
                raise MatrixFormatError(f"dimensions must be positive, got {rows} x {cols}", lineno)
            try:
                ring = SemiringId(fields[3])
            except ValueError:
                raise MatrixFormatError(f"unknown ring {fields[3]!r}", lineno) from None
            cells = [[get_semiring(ring).zero] * cols for _ in range(rows)]
            continue
        if len(fields) != 3:
            raise MatrixFormatError("expected 'ROW COL VALUE'", lineno)
        i = _int_field(fields[0], "row", lineno)
        j = _int_field(fields[1], "column", lineno)
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise MatrixFormatError(f"entry ({i}, {j}) outside {rows} x {cols}", lineno)
        if (i, j) in seen:
            raise MatrixFormatError(f"duplicate entry ({i}, {j})", lineno)
        seen.add((i, j))
        try:
            cells[i - 1][j - 1] = parse_token(ring, fields[2])
        except ValueError as exc:
            raise MatrixFormatError(str(exc), lineno) from None
    if ring is None:
        raise MatrixFormatError("missing header")
    return Matrix(rows, cols, ring, tuple(tuple(row) for row in cells))  # type: ignore[arg-type]


def print_matrix(m: Matrix) -> str:
    lines = [f"matrix {m.rows} {m.cols} {m.ring}"]
    lines.extend(f"{i} {j} {format_token(m.ring, value)}" for i, j, value in m.nonzero())
    return "\n".join(lines) + "\n"


def read_matrix(path: PathLike) -> Matrix:
    return parse_matrix(Path(path).read_text(encoding="utf-8"))


def write_matrix(path: PathLike, m: Matrix) -> None:
    Path(path).write_text(print_matrix(m), encoding="utf-8")
