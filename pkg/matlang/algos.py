"""
Graph algorithms written as programs, and direct implementations to check
them against.

The programs ship as package data under ``matlang/programs``; each file
starts with a ``% dialect: <name>`` header naming the smallest dialect the
program belongs to.
"""

import logging
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from importlib.resources import files
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from .evaluate import Evaluator, Instance, Matrix
from .ir import Dialect, Expr, Schema, SemiringId
from .semiring import INF, get_semiring
from .textio import parse_program

logger = logging.getLogger(__name__)

PROGRAMS = ("wcc", "reach", "reach_literal", "sssp", "vec_sum", "vec_max", "recurrence")
ALGORITHMS = ("wcc", "reach", "sssp", "maxv")

Distance = Union[int, float]
Edge = Tuple[int, int, Optional[int]]


@dataclass(frozen=True)
class GraphSpec:
    """A graph on vertices ``1..n``; edges are ``(u, v, weight)``."""

    n: int
    edges: Tuple[Edge, ...] = ()
    directed: bool = True

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"a graph needs at least one vertex, got n={self.n}")
        for u, v, _ in self.edges:
            if not (1 <= u <= self.n and 1 <= v <= self.n):
                raise ValueError(f"edge ({u}, {v}) has an endpoint outside 1..{self.n}")

    @property
    def weighted(self) -> bool:
        return all(w is not None for _, _, w in self.edges)

    def arcs(self) -> Iterable[Edge]:
        """Edges as directed arcs, both ways for undirected graphs."""
        for u, v, w in self.edges:
            yield u, v, w
            if not self.directed and u != v:
                yield v, u, w


@lru_cache(maxsize=None)
def load_program(name: str) -> Tuple[Schema, Expr, Dialect]:
    """Parse a shipped program by name."""
    if name not in PROGRAMS:
        raise ValueError(f"unknown program {name!r}; choose from {', '.join(PROGRAMS)}")
    text = files("matlang").joinpath("programs", f"{name}.ml").read_text(encoding="utf-8")
    return parse_program(text)


def program_header_dialect(name: str) -> Optional[Dialect]:
    """The dialect a shipped program's header comment documents."""
    text = files("matlang").joinpath("programs", f"{name}.ml").read_text(encoding="utf-8")
    for line in text.splitlines():
        if line.startswith("% dialect:"):
            return Dialect(line.split(":", 1)[1].strip())
    return None


def _program(name: str) -> Tuple[Schema, Expr]:
    schema, expr, _ = load_program(name)
    return schema, expr


def wcc_program() -> Tuple[Schema, Expr]:
    return _program("wcc")


def reach_program() -> Tuple[Schema, Expr]:
    return _program("reach")


def reach_literal_program() -> Tuple[Schema, Expr]:
    return _program("reach_literal")


def sssp_program() -> Tuple[Schema, Expr]:
    return _program("sssp")


def vec_sum_program() -> Tuple[Schema, Expr]:
    return _program("vec_sum")


def vec_max_program() -> Tuple[Schema, Expr]:
    return _program("vec_max")


def recurrence_program() -> Tuple[Schema, Expr]:
    return _program("recurrence")


# Graphs and matrices.


def adjacency_matrix(g: GraphSpec, ring: SemiringId = SemiringId.BOOL) -> Matrix:
    """Adjacency matrix of ``g`` over ``ring``.

    Over bool an arc is ``true``; over the other rings it carries its weight
    (the smallest one for parallel arcs under min-plus) and missing arcs
    hold the ring's zero.
    """
    sr = get_semiring(ring)
    cells: List[List[Any]] = [[sr.zero] * g.n for _ in range(g.n)]
    for u, v, w in g.arcs():
        if ring is SemiringId.BOOL:
            cells[u - 1][v - 1] = True
            continue
        if w is None:
            raise ValueError(f"edge ({u}, {v}) has no weight")
        value = float(w) if sr.domain == "R" else w
        current = cells[u - 1][v - 1]
        cells[u - 1][v - 1] = value if sr.is_zero(current) else sr.add(current, value)
    return Matrix.from_rows(ring, cells)


def source_vector(n: int, s: int, ring: SemiringId = SemiringId.BOOL) -> Matrix:
    """The ``n x 1`` vector holding the ring's one at ``s`` and zero elsewhere.

    >>> source_vector(3, 2, SemiringId.INT_MIN_PLUS).column()
    [inf, 0, inf]
    """
    if not 1 <= s <= n:
        raise ValueError(f"source {s} outside 1..{n}")
    sr = get_semiring(ring)
    return Matrix(n, 1, ring, tuple((sr.one if i == s else sr.zero,) for i in range(1, n + 1)))


def graph_from_matrix(m: Matrix, directed: bool = True) -> GraphSpec:
    """Read a square adjacency matrix; nonzero entries become edges.

    Entries of the integer rings become edge weights. An undirected graph
    keeps each edge once, from the upper triangle and diagonal.
    """
    if m.rows != m.cols:
        raise ValueError(f"adjacency matrix must be square, got {m.rows} x {m.cols}")
    weighted = m.ring not in (SemiringId.BOOL,)
    edges = []
    for i, j, value in m.nonzero():
        if not directed and i > j:
            continue
        weight = int(value) if weighted else None
        edges.append((i, j, weight))
    return GraphSpec(m.rows, tuple(edges), directed)


# Direct implementations.


class _DisjointSet:
    """Union-find whose representatives are the smallest members."""

    def __init__(self, n: int) -> None:
        self.parent = list(range(n + 1))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x: int, y: int) -> None:
        i, j = self.find(x), self.find(y)
        if i < j:
            self.parent[j] = i
        elif j < i:
            self.parent[i] = j


def oracle_wcc(g: GraphSpec) -> Dict[int, int]:
    """Each vertex mapped to the smallest vertex of its component."""
    components = _DisjointSet(g.n)
    for u, v, _ in g.edges:
        components.union(u, v)
    return {u: components.find(u) for u in range(1, g.n + 1)}


def oracle_reach(g: GraphSpec, s: int) -> Set[int]:
    """Vertices reachable from ``s``, by breadth-first search."""
    successors: Dict[int, List[int]] = {u: [] for u in range(1, g.n + 1)}
    for u, v, _ in g.arcs():
        successors[u].append(v)
    seen = {s}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for v in successors[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def oracle_sssp(g: GraphSpec, s: int) -> Dict[int, Distance]:
    """Shortest distances from ``s`` by Bellman-Ford; unreachable is ``inf``."""
    if not g.weighted:
        raise ValueError("shortest paths need a weight on every edge")
    arcs = list(g.arcs())
    if any(w < 0 for _, _, w in arcs):  # type: ignore[operator]
        raise ValueError("shortest paths need nonnegative weights")
    dist: Dict[int, Distance] = {u: INF for u in range(1, g.n + 1)}
    dist[s] = 0
    for _ in range(g.n - 1):
        changed = False
        for u, v, w in arcs:
            if dist[u] + w < dist[v]:  # type: ignore[operator]
                dist[v] = dist[u] + w  # type: ignore[operator]
                changed = True
        if not changed:
            break
    return dist


def oracle_max(values: Sequence[int]) -> Distance:
    """Maximum of ``values`` once cast to max-plus, where zero becomes ``-inf``."""
    return max((v if v != 0 else -INF for v in values), default=-INF)


# Reading results.


def _single_nonzero(m: Matrix, row: int) -> int:
    sr = get_semiring(m.ring)
    cols = [j + 1 for j, value in enumerate(m.data[row]) if not sr.is_zero(value)]
    if len(cols) != 1:
        raise ValueError(f"row {row + 1} of the label matrix has {len(cols)} nonzero entries")
    return cols[0]


def decode_labels(m: Matrix) -> Dict[int, int]:
    """Vertex ``u`` to the column of row ``u``'s single nonzero entry."""
    return {u + 1: _single_nonzero(m, u) for u in range(m.rows)}


def decode_reach(m: Matrix) -> Set[int]:
    sr = get_semiring(m.ring)
    return {i + 1 for i, value in enumerate(m.column()) if not sr.is_zero(value)}


def decode_distances(m: Matrix) -> Dict[int, Distance]:
    return {i + 1: value for i, value in enumerate(m.column())}


@dataclass(frozen=True)
class AlgorithmRun:
    name: str
    result: Matrix
    decoded: Any
    expected: Any

    @property
    def agrees(self) -> bool:
        return bool(self.decoded == self.expected)

    def as_record(self) -> Dict[str, Any]:
        def plain(value: Any) -> Any:
            if isinstance(value, set):
                return sorted(value)
            if isinstance(value, dict):
                return {str(k): plain(v) for k, v in sorted(value.items())}
            if isinstance(value, float):
                return str(value) if value in (INF, -INF) else value
            return value

        return {
            "algorithm": self.name,
            "result": plain(self.decoded),
            "expected": plain(self.expected),
            "agrees": self.agrees,
        }


def run_algorithm(
    name: str,
    data: Union[GraphSpec, Sequence[int]],
    source: Optional[int] = None,
    evaluator: Optional[Evaluator] = None,
) -> AlgorithmRun:
    """Run a shipped algorithm and its direct implementation on ``data``.

    ``data`` is a graph for ``wcc``, ``reach`` and ``sssp`` and a sequence
    of integers for ``maxv``; ``reach`` and ``sssp`` need ``source``.
    """
    if evaluator is None:
        evaluator = Evaluator()
    if name == "maxv":
        values = list(data)  # type: ignore[arg-type]
        schema, expr = vec_max_program()
        vector = Matrix.from_rows(SemiringId.INT, [[v] for v in values])
        result = evaluator.evaluate(Instance.from_matrices(schema, {"V": vector}), expr)
        return AlgorithmRun(name, result, result.data[0][0], oracle_max(values))
    if not isinstance(data, GraphSpec):
        raise ValueError(f"{name} runs on a graph")
    g = data
    if name == "wcc":
        schema, expr = wcc_program()
        # components are weak, so arcs count both ways
        mats = {"A": adjacency_matrix(GraphSpec(g.n, g.edges, directed=False))}
        result = evaluator.evaluate(Instance.from_matrices(schema, mats), expr)
        return AlgorithmRun(name, result, decode_labels(result), oracle_wcc(g))
    if name not in ("reach", "sssp"):
        raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
    if source is None:
        raise ValueError(f"{name} needs a source vertex")
    ring = SemiringId.BOOL if name == "reach" else SemiringId.INT_MIN_PLUS
    schema, expr = reach_program() if name == "reach" else sssp_program()
    mats = {"A": adjacency_matrix(g, ring), "S": source_vector(g.n, source, ring)}
    result = evaluator.evaluate(Instance.from_matrices(schema, mats), expr)
    logger.info("%s from %d on %d vertices", name, source, g.n)
    if name == "reach":
        return AlgorithmRun(name, result, decode_reach(result), oracle_reach(g, source))
    return AlgorithmRun(name, result, decode_distances(result), oracle_sssp(g, source))
