"""
The ``matlang`` command.

Exit codes: 0 success, 2 syntax, type, dialect or lowering error, 3 I/O or
matrix file error, 4 nonconforming instance or evaluation failure, 5 a
difference between two results.
"""

import argparse
import logging
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, TextIO, Tuple

import jmespath
from jmespath.exceptions import JMESPathError

from . import __version__
from .algos import ALGORITHMS, graph_from_matrix, run_algorithm
from .evaluate import Evaluator, Instance, InstanceError, first_difference
from .fuzz import FuzzConfig, run_fuzz
from .ir import DialectViolation, Dialect, Expr, MatlangError, Schema
from .rewrite import LoweringError, evaluate_lowered, lower
from .semiring import EvaluationError, format_token
from .textio import (
    MatrixFormatError,
    ProgramSyntaxError,
    print_matrix,
    print_program,
    read_matrix,
    read_program,
)
from .typecheck import TypeCheckError, check_program
from .utils import dump_record, parse_bindings, shorten

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_STATIC = 2
EXIT_IO = 3
EXIT_INSTANCE = 4
EXIT_MISMATCH = 5

TARGETS = {"dec": Dialect.DEC_ML, "sifor": Dialect.SIFOR_ML}


@dataclass
class CliConfig:
    command: str
    program: Optional[Path] = None
    bindings: Dict[str, Path] = field(default_factory=dict)
    sizes: Dict[str, int] = field(default_factory=dict)
    target: Dialect = Dialect.DEC_ML
    encode: Optional[bool] = None
    out: Optional[Path] = None
    algorithm: Optional[str] = None
    graph: Optional[Path] = None
    source: Optional[int] = None
    seed: int = 0
    cases: int = 300
    max_dim: int = 6
    max_depth: int = 4
    max_loop_depth: int = 1
    encode_all: bool = False
    jobs: int = 1
    output_format: str = "text"
    query: Optional[str] = None
    verbosity: int = 0

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "CliConfig":
        sizes = {}
        for name, value in parse_bindings(args.size or []).items():
            if not value.isdigit() or int(value) < 1:
                raise ValueError(f"size {name} must be a positive integer, got {value!r}")
            sizes[name] = int(value)
        return cls(
            command=args.command,
            program=getattr(args, "program", None),
            bindings={k: Path(v) for k, v in parse_bindings(args.bind or []).items()},
            sizes=sizes,
            target=TARGETS[getattr(args, "to", None) or "dec"],
            encode=True if getattr(args, "encode", False) else None,
            out=args.out,
            algorithm=getattr(args, "algorithm", None),
            graph=getattr(args, "graph", None),
            source=getattr(args, "source", None),
            seed=getattr(args, "seed", 0),
            cases=getattr(args, "cases", 300),
            max_dim=getattr(args, "max_dim", 6),
            max_depth=getattr(args, "max_depth", 4),
            max_loop_depth=getattr(args, "max_loop_depth", 1),
            encode_all=getattr(args, "encode_all", False),
            jobs=getattr(args, "jobs", 1),
            output_format=args.format,
            query=args.query,
            verbosity=args.verbose,
        )


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "records"), default="text")
    common.add_argument("--query", metavar="EXPR", help="JMESPath applied to every record")
    common.add_argument("--out", type=Path, metavar="PATH")
    common.add_argument("--bind", action="append", metavar="NAME=PATH")
    common.add_argument("--size", action="append", metavar="SYM=N")
    common.add_argument("-v", "--verbose", action="count", default=0)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="matlang", description="Matrix query languages over semirings."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", parents=[common], help="type-check a program")
    check.add_argument("program", type=Path)

    run = sub.add_parser("eval", parents=[common], help="evaluate a program")
    run.add_argument("program", type=Path)

    for name, help_text in (("lower", "lower a program"), ("diff", "compare a program with its lowering")):
        cmd = sub.add_parser(name, parents=[common], help=help_text)
        cmd.add_argument("program", type=Path)
        cmd.add_argument("--to", choices=sorted(TARGETS), default="dec")
        cmd.add_argument("--encode", action="store_true", help="encode values even for single-ring programs")

    algo = sub.add_parser("algo", parents=[common], help="run a shipped graph algorithm")
    algo.add_argument("algorithm", choices=ALGORITHMS)
    algo.add_argument("graph", type=Path, help="adjacency matrix (a vector of integers for maxv)")
    algo.add_argument("--source", type=int)

    fuzz = sub.add_parser("fuzz", parents=[common], help="differential testing of the lowerings")
    fuzz.add_argument("--seed", type=int, default=0)
    fuzz.add_argument("--cases", type=int, default=300)
    fuzz.add_argument("--max-dim", type=int, default=6)
    fuzz.add_argument("--max-depth", type=int, default=4)
    fuzz.add_argument("--max-loop-depth", type=int, default=1, help="how deep loops may nest")
    fuzz.add_argument(
        "--encode-all", action="store_true", help="also lower single-ring programs with encoding"
    )
    fuzz.add_argument("--jobs", type=int, default=1)
    return parser


class Cli:
    def __init__(self, config: CliConfig, stdout: TextIO, stderr: TextIO) -> None:
        self.config = config
        self.stdout = stdout
        self.stderr = stderr

    def run(self) -> int:
        method = getattr(self, "cmd_" + self.config.command)
        logger.info("running %s", self.config.command)
        return method()  # type: ignore[no-any-return]

    # output

    def emit(self, record: Dict[str, Any], text: str) -> None:
        if self.config.output_format == "text":
            if text:
                self.stdout.write(text.rstrip("\n") + "\n")
            return
        if self.config.query:
            result = jmespath.search(self.config.query, record)
            if result is None:
                return
            if not isinstance(result, dict):
                result = {"result": result}
            record = result
        self.stdout.write(dump_record(record) + "\n")

    def write_result(self, text: str) -> None:
        if self.config.out is None:
            return
        self.config.out.write_text(text, encoding="utf-8")
        logger.info("wrote %s", self.config.out)

    # inputs

    def load(self) -> Tuple[Schema, Expr, Dialect]:
        assert self.config.program is not None
        return read_program(self.config.program)

    def instance(self, schema: Schema) -> Instance:
        sizes = dict(self.config.sizes)
        mats = {}
        for name, path in self.config.bindings.items():
            if name not in schema:
                warnings.warn(f"--bind {name}: {name} is not declared by the program", stacklevel=2)
                continue
            mats[name] = read_matrix(path)
        used = {term.symbol for t in schema.values() for term in (t.rows, t.cols) if term.symbol}
        for symbol in sorted(set(sizes) - used):
            warnings.warn(f"--size {symbol}: the program has no size {symbol}", stacklevel=2)
            del sizes[symbol]
        return Instance.from_matrices(schema, mats, sizes)

    # subcommands

    def cmd_check(self) -> int:
        schema, expr, _ = self.load()
        dialect, t = check_program(schema, expr)
        self.emit(
            {"command": "check", "dialect": str(dialect), "type": str(t)},
            f"dialect: {dialect}\ntype: {t}",
        )
        return EXIT_OK

    def cmd_eval(self) -> int:
        schema, expr, _ = self.load()
        check_program(schema, expr)
        result = Evaluator().evaluate(self.instance(schema), expr)
        text = print_matrix(result)
        self.write_result(text)
        record = {
            "command": "eval",
            "rows": result.rows,
            "cols": result.cols,
            "ring": str(result.ring),
            "entries": [[i, j, format_token(result.ring, v)] for i, j, v in result.nonzero()],
        }
        self.emit(record, "" if self.config.out else text)
        return EXIT_OK

    def cmd_lower(self) -> int:
        schema, expr, _ = self.load()
        check_program(schema, expr)
        lowered = lower(expr, schema, self.config.target, encode=self.config.encode)
        text = print_program(lowered.schema, lowered.expr)
        self.write_result(text)
        report = lowered.report
        if self.config.output_format == "text":
            self.stderr.write(report.render() + "\n")
            self.emit({}, "" if self.config.out else text)
        else:
            record = {"command": "lower", **report.as_record()}
            if self.config.out is None:
                record["program"] = text
            self.emit(record, "")
        return EXIT_OK

    def cmd_diff(self) -> int:
        schema, expr, _ = self.load()
        check_program(schema, expr)
        instance = self.instance(schema)
        evaluator = Evaluator()
        expected = evaluator.evaluate(instance, expr)
        lowered = lower(expr, schema, self.config.target, encode=self.config.encode)
        actual = evaluate_lowered(lowered, instance, evaluator)
        cell = first_difference(expected, actual)
        record = {
            "command": "diff",
            "source": str(lowered.report.source),
            "target": str(self.config.target),
            "encoded": lowered.report.encoded,
            "equal": cell is None,
            "cell": list(cell) if cell is not None else None,
        }
        if cell is None:
            self.emit(record, f"{lowered.report.source} -> {self.config.target}: results agree")
            return EXIT_OK
        text = f"{lowered.report.source} -> {self.config.target}: results differ at cell {cell}"
        self.emit(record, text)
        logger.info("expected %s", shorten(repr(expected.to_lists()), 200))
        logger.info("found %s", shorten(repr(actual.to_lists()), 200))
        return EXIT_MISMATCH

    def cmd_algo(self) -> int:
        assert self.config.algorithm is not None and self.config.graph is not None
        m = read_matrix(self.config.graph)
        name = self.config.algorithm
        data: Any
        if name == "maxv":
            data = m.column()
        else:
            data = graph_from_matrix(m, directed=name != "wcc")
        try:
            run = run_algorithm(name, data, self.config.source)
        except ValueError as exc:
            raise InstanceError(str(exc)) from exc
        self.write_result(print_matrix(run.result))
        record = {"command": "algo", **run.as_record()}
        verdict = "agrees" if run.agrees else "DIFFERS from"
        lines = [f"{name}: {_render_value(run.decoded)}", f"{verdict} the direct computation"]
        self.emit(record, "\n".join(lines))
        return EXIT_OK if run.agrees else EXIT_MISMATCH

    def cmd_fuzz(self) -> int:
        config = FuzzConfig(
            seed=self.config.seed,
            cases=self.config.cases,
            max_dim=self.config.max_dim,
            max_depth=self.config.max_depth,
            max_loop_depth=self.config.max_loop_depth,
            encode_all=self.config.encode_all,
        )
        report = run_fuzz(config, jobs=self.config.jobs)
        if self.config.output_format == "records":
            for result in report.results:
                self.emit(result.as_record(), "")
        else:
            for failure in report.failures:
                self.emit({}, failure.render())
            self.emit({}, report.summary())
        return EXIT_OK if report.ok else EXIT_MISMATCH


def _render_value(value: Any) -> str:
    if isinstance(value, dict):
        return " ".join(f"{k}:{_render_value(v)}" for k, v in sorted(value.items()))
    if isinstance(value, set):
        return "{" + ", ".join(str(v) for v in sorted(value)) + "}"
    return str(value)


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ProgramSyntaxError, TypeCheckError, DialectViolation, LoweringError)):
        return EXIT_STATIC
    if isinstance(exc, (OSError, MatrixFormatError)):
        return EXIT_IO
    if isinstance(exc, (InstanceError, EvaluationError)):
        return EXIT_INSTANCE
    return EXIT_STATIC


def main(
    argv: Optional[Sequence[str]] = None,
    stdout: Optional[TextIO] = None,
    stderr: Optional[TextIO] = None,
) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = CliConfig.from_args(args)
    except ValueError as exc:
        parser.error(str(exc))
    if config.query:
        try:
            jmespath.compile(config.query)
        except JMESPathError as exc:
            parser.error(f"invalid --query: {exc}")
    if config.verbosity:
        level = logging.DEBUG if config.verbosity > 1 else logging.INFO
        logging.basicConfig(level=level, stream=stderr, format="%(name)s: %(message)s")
    try:
        return Cli(config, stdout, stderr).run()
    except (MatlangError, OSError) as exc:
        stderr.write(f"matlang {config.command}: {exc}\n")
        return _exit_code(exc)
