from typing import Dict, List, Type, Union

from pytest import mark, raises

from matlang.utils import dump_record, parse_binding, parse_bindings, shorten


@mark.parametrize(
    "width,expected",
    (
        (-1, ValueError),
        (0, ""),
        (1, "."),
        (2, ".."),
        (3, "..."),
        (4, "f..."),
        (5, "fo..."),
        (6, "foobar"),
        (7, "foobar"),
    ),
)
def test_shorten(width: int, expected: Union[str, Type[Exception]]) -> None:
    if isinstance(expected, str):
        assert shorten("foobar", width) == expected
    else:
        with raises(expected):
            shorten("foobar", width)


@mark.parametrize(
    "text",
    ("A", "=graph.mtx", "1A=graph.mtx", "A graph.mtx", "A="),
)
def test_parse_binding_rejects(text: str) -> None:
    with raises(ValueError):
        parse_binding(text)


def test_parse_binding_keeps_equals_in_value() -> None:
    assert parse_binding("S=a=b.mtx") == ("S", "a=b.mtx")


@mark.parametrize(
    "items, expected",
    (
        [[], {}],
        [["A=a.mtx"], {"A": "a.mtx"}],
        [["A=a.mtx", "S=s.mtx"], {"A": "a.mtx", "S": "s.mtx"}],
        [["A=a.mtx,S=s.mtx"], {"A": "a.mtx", "S": "s.mtx"}],
        [["A=a.mtx, S=s.mtx", "n=4"], {"A": "a.mtx", "S": "s.mtx", "n": "4"}],
    ),
)
def test_parse_bindings(items: List[str], expected: Dict[str, str]) -> None:
    assert parse_bindings(items) == expected


def test_parse_bindings_duplicate() -> None:
    with raises(ValueError, match="A is bound twice"):
        parse_bindings(["A=a.mtx", "A=b.mtx"])


def test_dump_record_is_one_line() -> None:
    text = dump_record({"program": "matrix A : n x n over bool;\nin A\n", "ok": True})
    assert "\n" not in text
    assert text.startswith('{"ok": true, ')
