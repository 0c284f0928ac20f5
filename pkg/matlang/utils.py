import json
import re
from typing import Any, Dict, Iterable, Tuple

_BINDING = re.compile(r"(?P<name>[A-Za-z_][A-Za-z0-9_]*)=(?P<value>.+)\Z")


def shorten(text: str, width: int, suffix: str = "...") -> str:
    """Truncate the given text to fit in the given width.

    >>> shorten("for { X := X * X } (V, A)", 12)
    'for { X :...'
    """
    if width < 0:
        raise ValueError("width must be equal or greater than 0")
    if len(text) <= width:
        return text
    if len(suffix) >= width:
        return suffix[:width]
    return text[: width - len(suffix)] + suffix


def parse_binding(text: str) -> Tuple[str, str]:
    """Split a ``NAME=VALUE`` command-line binding.

    >>> parse_binding("A=graphs/path4.mtx")
    ('A', 'graphs/path4.mtx')
    """
    match = _BINDING.match(text)
    if match is None:
        raise ValueError(f"expected NAME=VALUE, got {text!r}")
    return match.group("name"), match.group("value")


def parse_bindings(items: Iterable[str]) -> Dict[str, str]:
    """Bindings from repeated ``NAME=VALUE`` options; each may also hold a
    comma-separated list. A name bound twice is an error."""
    bindings: Dict[str, str] = {}
    for item in items:
        for part in item.split(","):
            name, value = parse_binding(part.strip())
            if name in bindings:
                raise ValueError(f"{name} is bound twice")
            bindings[name] = value
    return bindings


def dump_record(record: Dict[str, Any]) -> str:
    """One line of machine-readable output, with stable key order.

    >>> dump_record({"status": "ok", "case": 3})
    '{"case": 3, "status": "ok"}'
    """
    return json.dumps(record, sort_keys=True, default=str)
