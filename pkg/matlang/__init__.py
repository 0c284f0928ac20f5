"""
Matrix query languages over semirings: a typed intermediate representation,
an evaluator, and the lowerings between the language fragments.
"""

__version__ = "0.1.0"
__all__ = [
    "Dialect",
    "Instance",
    "Matrix",
    "MatlangError",
    "Schema",
    "SemiringId",
    "check_program",
    "evaluate",
    "lower",
    "parse_matrix",
    "parse_program",
    "print_matrix",
    "print_program",
]

from matlang.evaluate import Instance, Matrix, evaluate  # NOQA
from matlang.ir import Dialect, MatlangError, Schema, SemiringId  # NOQA
from matlang.rewrite import lower  # NOQA
from matlang.textio import parse_matrix, parse_program, print_matrix, print_program  # NOQA
from matlang.typecheck import check_program  # NOQA
