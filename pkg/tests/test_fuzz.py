import math
import random
import unittest
from typing import Any, Dict, List, Tuple

from pytest import mark, raises

from matlang.evaluate import Evaluator, Matrix, eval_scalar, matrices_agree
from matlang.fuzz import (
    CaseResult,
    FailureBundle,
    FuzzConfig,
    FuzzReport,
    ProgramGenerator,
    run_case,
    run_fuzz,
)
from matlang.ir import (
    Apply,
    Diag,
    Dialect,
    Expr,
    ForCanonical,
    ForCounted,
    Let,
    MatMul,
    Ones,
    PickAny,
    SemiringId,
    Transpose,
    Var,
    detect_dialect,
    output_ring,
)
from matlang.semiring import EncodedValue, EvaluationError, ScalarValue, get_semiring
from matlang.textio import parse_program, print_program
from matlang.typecheck import infer_type

ML_ONLY = FuzzConfig(seed=7, cases=12, max_dim=3, max_depth=3, dialects=(Dialect.ML,))
ALL_CHECKS = ("roundtrip", "typecheck", "soundness", "lower to dec", "lower to sifor")


@mark.parametrize(
    "kwargs",
    (
        {"cases": -1},
        {"max_dim": 0},
        {"dialects": ()},
        {"max_loop_depth": -1},
    ),
)
def test_config_validation(kwargs: Dict[str, Any]) -> None:
    with raises(ValueError):
        FuzzConfig(**kwargs)


@mark.parametrize(
    "dialect", (Dialect.ML, Dialect.FOR_ML, Dialect.SIFOR_ML, Dialect.DEC_ML, Dialect.CORE)
)
@mark.parametrize("seed", range(8))
def test_generated_programs_are_typed_and_in_dialect(dialect: Dialect, seed: int) -> None:
    generator = ProgramGenerator(random.Random(seed), dialect, max_depth=3)
    schema, expr = generator.program()
    assert infer_type(schema, expr).ring is generator.rings[0]
    order = list(Dialect)
    assert order.index(detect_dialect(expr, schema)) <= order.index(dialect)
    assert parse_program(print_program(schema, expr))[1] == expr


def test_instances_match_the_schema() -> None:
    generator = ProgramGenerator(random.Random(3), Dialect.CORE)
    instance = generator.instance(max_dim=4)
    instance.check(generator.schema)
    assert set(instance.sizes) == {"a", "b"}
    assert all(1 <= size <= 4 for size in instance.sizes.values())


class RunTestCase(unittest.TestCase):
    def test_single_ring_programs_pass(self) -> None:
        report = run_fuzz(ML_ONLY)
        self.assertEqual(len(report.results), 12)
        self.assertEqual(report.count("failed"), 0)
        self.assertTrue(report.ok)
        self.assertEqual(report.count("ok") + report.count("skipped"), 12)
        for result in report.results:
            if result.status == "ok":
                self.assertEqual(result.checks, ALL_CHECKS)

    def test_cases_replay_alone(self) -> None:
        report = run_fuzz(ML_ONLY)
        self.assertEqual(run_case(ML_ONLY, 5), report.results[5])
        self.assertEqual(
            [r.as_record() for r in run_fuzz(ML_ONLY).results],
            [r.as_record() for r in report.results],
        )

    def test_worker_pool_keeps_order(self) -> None:
        config = FuzzConfig(seed=1, cases=6, max_dim=2, max_depth=2, dialects=(Dialect.ML,))
        self.assertEqual(run_fuzz(config, jobs=2).results, run_fuzz(config).results)

    def test_dialects_rotate(self) -> None:
        config = FuzzConfig(cases=0, max_dim=2, max_depth=2, dialects=(Dialect.ML, Dialect.DEC_ML))
        self.assertIs(run_case(config, 0).dialect, Dialect.ML)
        self.assertIs(run_case(config, 3).dialect, Dialect.DEC_ML)


class ReportTestCase(unittest.TestCase):
    def setUp(self) -> None:
        self.bundle = FailureBundle(
            seed=4,
            index=2,
            dialect=Dialect.DEC_ML,
            stage="lower to sifor",
            message="results differ at cell (1, 1)",
            program="matrix A : a x a over int;\nin pickany(A)\n",
            sizes={"b": 1, "a": 2},
            matrices={"A": "matrix 2 2 int\n1 1 3\n"},
        )
        self.report = FuzzReport(
            FuzzConfig(cases=3),
            [
                CaseResult(0, Dialect.ML, "ok", ALL_CHECKS),
                CaseResult(1, Dialect.ML, "skipped", ("roundtrip", "typecheck")),
                CaseResult(2, Dialect.DEC_ML, "failed", ALL_CHECKS[:4], self.bundle),
            ],
        )

    def test_summary(self) -> None:
        self.assertEqual(self.report.summary(), "3 cases: 1 ok, 1 skipped, 1 failed")
        self.assertFalse(self.report.ok)
        self.assertEqual(self.report.failures, [self.bundle])

    def test_render(self) -> None:
        lines = self.bundle.render().splitlines()
        self.assertEqual(lines[0], "case 2 (seed 4, dec) failed at lower to sifor:")
        self.assertIn("sizes: a=2, b=1", lines)
        self.assertIn("% A", lines)

    def test_records(self) -> None:
        record = self.report.results[2].as_record()
        self.assertEqual(record["status"], "failed")
        self.assertEqual(record["dialect"], "dec")
        self.assertEqual(record["failure"]["sizes"], {"a": 2, "b": 1})
        self.assertNotIn("failure", self.report.results[0].as_record())


LOWERED_DIALECTS = (Dialect.FOR_ML, Dialect.SIFOR_ML, Dialect.DEC_ML, Dialect.CORE)


@mark.parametrize("seed", range(3))
def test_every_dialect_lowers_soundly(seed: int) -> None:
    config = FuzzConfig(
        seed=seed, cases=100, max_dim=3, max_depth=3, dialects=LOWERED_DIALECTS, encode_all=True
    )
    report = run_fuzz(config)
    assert report.count("failed") == 0, "\n".join(f.render() for f in report.failures)
    assert report.count("ok") > 0


@mark.parametrize("seed", range(2))
def test_nested_loops_lower_soundly(seed: int) -> None:
    config = FuzzConfig(
        seed=seed,
        cases=50,
        max_dim=3,
        max_depth=4,
        max_loop_depth=2,
        dialects=LOWERED_DIALECTS,
        encode_all=True,
    )
    report = run_fuzz(config)
    assert report.count("failed") == 0, "\n".join(f.render() for f in report.failures)


Cells = Tuple[SemiringId, List[List[Any]]]


def scalar(ring: SemiringId, payload: Any) -> ScalarValue:
    if ring is SemiringId.REAL and math.isinf(payload):
        return EncodedValue(ring, payload)
    return ScalarValue(ring, payload)


def reference(env: Dict[str, Cells], e: Expr) -> Cells:
    """Cell by cell evaluation straight from the semantics of each construct."""
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Transpose):
        ring, cells = reference(env, e.operand)
        return ring, [list(col) for col in zip(*cells)]
    if isinstance(e, Ones):
        ring, cells = reference(env, e.operand)
        return ring, [[get_semiring(ring).one] for _ in cells]
    if isinstance(e, Diag):
        ring, cells = reference(env, e.operand)
        z = get_semiring(ring).zero
        size = len(cells)
        return ring, [[row[0] if i == j else z for j in range(size)] for i, row in enumerate(cells)]
    if isinstance(e, MatMul):
        ring, a = reference(env, e.left)
        _, b = reference(env, e.right)
        sr = get_semiring(ring)
        out = []
        for row in a:
            out_row = []
            for col in zip(*b):
                total = sr.zero
                for x, y in zip(row, col):
                    total = sr.add(total, sr.mul(x, y))
                out_row.append(total)
            out.append(out_row)
        return ring, out
    if isinstance(e, Apply):
        args = [reference(env, arg) for arg in e.args]
        names = [name for name, _ in e.fn.params]
        out = []
        for i, row in enumerate(args[0][1]):
            out_row = []
            for j in range(len(row)):
                bound = {
                    name: scalar(ring, cells[i][j]) for name, (ring, cells) in zip(names, args)
                }
                out_row.append(eval_scalar(bound, e.fn.body).payload)
            out.append(out_row)
        return output_ring(e.fn), out
    if isinstance(e, PickAny):
        ring, cells = reference(env, e.operand)
        z = get_semiring(ring).zero
        kept = []
        for row in cells:
            first = next((j for j, x in enumerate(row) if x != z), None)
            kept.append([x if j == first else z for j, x in enumerate(row)])
        return ring, kept
    if isinstance(e, Let):
        return reference({**env, e.name: reference(env, e.bound)}, e.body)
    if isinstance(e, ForCanonical):
        ring, vector = env[e.var]
        if e.is_zero_init:
            (name, _), = e.bindings
            r, shape = env[name]
            z = get_semiring(r).zero
            state = {name: (r, [[z] * len(row) for row in shape])}
        else:
            state = {name: reference(env, init) for name, init in zip(e.names, e.inits)}
        sr = get_semiring(ring)
        for k in range(len(vector)):
            basis = [[sr.one if i == k else sr.zero] for i in range(len(vector))]
            scope = {**env, **state, e.var: (ring, basis)}
            state = {name: reference(scope, body) for name, body in e.bindings}
        return state[e.names[0]]
    if isinstance(e, ForCounted):
        _, driver = reference(env, e.driver)
        state = {name: reference(env, init) for name, init in zip(e.names, e.inits)}
        for _ in driver:
            scope = {**env, **state}
            state = {name: reference(scope, body) for name, body in e.bindings}
        return state[e.names[0]]
    raise TypeError(f"no reference rule for {type(e).__name__}")


@mark.parametrize("dialect", (Dialect.ML,) + LOWERED_DIALECTS)
@mark.parametrize("seed", range(20))
def test_evaluator_matches_reference(dialect: Dialect, seed: int) -> None:
    rng = random.Random(seed)
    generator = ProgramGenerator(rng, dialect, max_depth=3, max_loop_depth=2)
    _, expr = generator.program()
    instance = generator.instance(max_dim=3)
    env = {name: (m.ring, m.to_lists()) for name, m in instance.mats.items()}
    try:
        expected = Evaluator().evaluate(instance, expr)
        ring, cells = reference(env, expr)
    except EvaluationError:
        return
    assert matrices_agree(expected, Matrix.from_rows(ring, cells))
