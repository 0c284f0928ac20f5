import json
from io import StringIO
from pathlib import Path
from typing import Dict, List, Tuple

import pytest
from pytest import mark, raises

from matlang.cli import EXIT_INSTANCE, EXIT_IO, EXIT_MISMATCH, EXIT_OK, EXIT_STATIC, main
from matlang.ir import Dialect
from matlang.textio import parse_program

PROGRAMS = Path(__file__).parent.parent / "matlang" / "programs"

RECURRENCE_INPUTS = {
    "A": "matrix 1 1 int\n1 1 2\n",
    "B": "matrix 1 1 int\n1 1 3\n",
    "v": "matrix 3 1 int\n1 1 1\n2 1 1\n3 1 1\n",
}


def run(*argv: str) -> Tuple[int, str, str]:
    stdout, stderr = StringIO(), StringIO()
    code = main(list(argv), stdout, stderr)
    return code, stdout.getvalue(), stderr.getvalue()


def write_inputs(tmp_path: Path, inputs: Dict[str, str]) -> List[str]:
    options = []
    for name, text in inputs.items():
        path = tmp_path / f"{name}.mtx"
        path.write_text(text)
        options.extend(["--bind", f"{name}={path}"])
    return options


def recurrence(tmp_path: Path) -> List[str]:
    return [str(PROGRAMS / "recurrence.ml")] + write_inputs(tmp_path, RECURRENCE_INPUTS)


def test_check() -> None:
    code, out, _ = run("check", str(PROGRAMS / "wcc.ml"))
    assert code == EXIT_OK
    assert out == "dialect: dec\ntype: a x a over bool\n"


def test_check_records() -> None:
    code, out, _ = run("check", str(PROGRAMS / "vec_max.ml"), "--format", "records")
    assert code == EXIT_OK
    assert json.loads(out) == {"command": "check", "dialect": "core", "type": "1 x 1 over int_max_plus"}


def test_eval(tmp_path: Path) -> None:
    code, out, _ = run("eval", *recurrence(tmp_path))
    assert code == EXIT_OK
    assert out == "matrix 1 1 int\n1 1 18\n"


def test_eval_to_file(tmp_path: Path) -> None:
    target = tmp_path / "result.mtx"
    code, out, _ = run("eval", *recurrence(tmp_path), "--out", str(target))
    assert code == EXIT_OK
    assert out == ""
    assert target.read_text() == "matrix 1 1 int\n1 1 18\n"


def test_eval_query(tmp_path: Path) -> None:
    argv = ["eval", *recurrence(tmp_path), "--format", "records", "--query", "entries"]
    code, out, _ = run(*argv)
    assert code == EXIT_OK
    assert json.loads(out) == {"result": [[1, 1, "18"]]}


def test_lower() -> None:
    code, out, err = run("lower", str(PROGRAMS / "recurrence.ml"), "--to", "dec")
    assert code == EXIT_OK
    assert err.splitlines()[0] == "lowered sifor -> dec"
    assert parse_program(out)[2] is Dialect.DEC_ML


def test_lower_records() -> None:
    code, out, _ = run("lower", str(PROGRAMS / "vec_max.ml"), "--format", "records")
    record = json.loads(out)
    assert code == EXIT_OK
    assert record["source"] == "core"
    assert record["encoded"] is True
    assert parse_program(record["program"])[2] is Dialect.DEC_ML


@mark.parametrize("target", ("dec", "sifor"))
def test_diff(tmp_path: Path, target: str) -> None:
    code, out, _ = run("diff", *recurrence(tmp_path), "--to", target)
    assert code == EXIT_OK
    assert out == f"sifor -> {target}: results agree\n"


def test_algo(tmp_path: Path) -> None:
    graph = tmp_path / "graph.mtx"
    graph.write_text("matrix 3 3 bool\n1 2 true\n2 1 true\n")
    code, out, _ = run("algo", "wcc", str(graph))
    assert code == EXIT_OK
    assert out == "wcc: 1:1 2:1 3:3\nagrees the direct computation\n"


def test_algo_sssp_records(tmp_path: Path) -> None:
    graph = tmp_path / "graph.mtx"
    graph.write_text("matrix 3 3 int_min_plus\n1 2 4\n2 3 1\n1 3 7\n")
    code, out, _ = run("algo", "sssp", str(graph), "--source", "1", "--format", "records")
    assert code == EXIT_OK
    record = json.loads(out)
    assert record["result"] == {"1": 0, "2": 4, "3": 5}
    assert record["agrees"] is True


def test_algo_needs_source(tmp_path: Path) -> None:
    graph = tmp_path / "graph.mtx"
    graph.write_text("matrix 2 2 bool\n1 2 true\n")
    code, _, err = run("algo", "reach", str(graph))
    assert code == EXIT_INSTANCE
    assert err == "matlang algo: reach needs a source vertex\n"


def test_fuzz_records() -> None:
    argv = ["fuzz", "--cases", "3", "--max-dim", "2", "--max-depth", "2"]
    code, out, _ = run(*argv, "--format", "records", "--query", "status")
    lines = out.splitlines()
    assert len(lines) == 3
    assert {json.loads(line)["result"] for line in lines} <= {"ok", "skipped", "failed"}
    assert code in (EXIT_OK, EXIT_MISMATCH)


def test_fuzz_loop_and_encoding_options() -> None:
    argv = ["fuzz", "--cases", "16", "--max-dim", "2", "--max-depth", "3"]
    options = ["--max-loop-depth", "2", "--encode-all"]
    code, out, _ = run(*argv, *options, "--format", "records", "--query", "checks")
    checks = [json.loads(line)["result"] for line in out.splitlines()]
    assert code == EXIT_OK
    assert len(checks) == 16
    assert any("lower to sifor encoded" in names for names in checks)
    assert run(*argv, "--max-loop-depth", "0")[0] == EXIT_OK


def test_syntax_error(tmp_path: Path) -> None:
    program = tmp_path / "bad.ml"
    program.write_text("matrix A : n x n over int;\nin A *\n")
    code, _, err = run("check", str(program))
    assert code == EXIT_STATIC
    assert err.startswith("matlang check: ")
    assert "unexpected end of input" in err


def test_type_error(tmp_path: Path) -> None:
    program = tmp_path / "bad.ml"
    program.write_text("matrix A : n x 1 over int;\nin A * A\n")
    code, _, err = run("check", str(program))
    assert code == EXIT_STATIC
    assert "matmul inner dims" in err


def test_missing_file(tmp_path: Path) -> None:
    code, _, err = run("check", str(tmp_path / "missing.ml"))
    assert code == EXIT_IO
    assert err.startswith("matlang check: ")


def test_bad_matrix_file(tmp_path: Path) -> None:
    inputs = dict(RECURRENCE_INPUTS, A="matrix 1 1 int\n1 1 2\n1 1 3\n")
    argv = [str(PROGRAMS / "recurrence.ml")] + write_inputs(tmp_path, inputs)
    code, _, err = run("eval", *argv)
    assert code == EXIT_IO
    assert "duplicate entry (1, 1)" in err


def test_missing_binding(tmp_path: Path) -> None:
    inputs = {k: v for k, v in RECURRENCE_INPUTS.items() if k != "B"}
    argv = [str(PROGRAMS / "recurrence.ml")] + write_inputs(tmp_path, inputs)
    code, _, err = run("eval", *argv)
    assert code == EXIT_INSTANCE
    assert err == "matlang eval: no matrix bound to B\n"


def test_conflicting_size(tmp_path: Path) -> None:
    code, _, err = run("eval", *recurrence(tmp_path), "--size", "n=2")
    assert code == EXIT_INSTANCE
    assert "v is 3 x 1, expected 2 x 1" in err


def test_unknown_binding_warns(tmp_path: Path) -> None:
    extra = write_inputs(tmp_path, {"Z": "matrix 1 1 int\n"})
    with pytest.warns(UserWarning, match="Z is not declared"):
        code, out, _ = run("eval", *recurrence(tmp_path), *extra)
    assert code == EXIT_OK
    assert out.endswith("1 1 18\n")


@mark.parametrize(
    "argv",
    (
        ["eval", "p.ml", "--size", "n=zero"],
        ["eval", "p.ml", "--bind", "A"],
        ["check", "p.ml", "--query", "[["],
        ["lower", "p.ml", "--to", "core"],
        ["--version"],
    ),
)
def test_usage_errors_exit(argv: List[str]) -> None:
    with raises(SystemExit):
        run(*argv)
