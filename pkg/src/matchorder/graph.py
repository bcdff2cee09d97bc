"""Immutable vertex-labeled undirected graphs stored in CSR form.

Graphs are read from and written to the ``t/v/e`` text format used by the
common subgraph-matching benchmark corpora::

    t <vertex_count> <edge_count>
    v <id> <label> <degree>
    e <src> <dst>

Labels are remapped to dense ids ``0..|L|-1`` in order of first appearance;
the original label values are kept in ``LabeledGraph.label_values`` so that
saving reproduces the input.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

__all__ = [
    "LabeledGraph",
    "GraphStats",
    "GraphFormatError",
    "MalformedLineError",
    "DuplicateVertexError",
    "UnknownVertexError",
    "DegreeMismatchError",
    "DuplicateEdgeError",
    "ExtractionError",
    "load_graph",
    "read_graph",
    "save_graph",
    "write_graph",
    "compute_stats",
    "align_labels",
    "induced_subgraph",
    "sample_connected_vertices",
    "extract_connected_query",
    "is_connected",
]


class GraphFormatError(ValueError):
    """Raised when graph text does not follow the ``t/v/e`` format."""

    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class MalformedLineError(GraphFormatError):
    pass


class DuplicateVertexError(GraphFormatError):
    pass


class UnknownVertexError(GraphFormatError):
    pass


class DegreeMismatchError(GraphFormatError):
    pass


class DuplicateEdgeError(GraphFormatError):
    pass


class ExtractionError(RuntimeError):
    """Raised when no connected query of the requested size could be sampled."""


@dataclass(frozen=True, eq=False)
class LabeledGraph:
    """Undirected vertex-labeled graph with sorted CSR adjacency.

    Use :meth:`from_edges` rather than the constructor; it validates the
    edge list and builds the CSR arrays.
    """

    labels: np.ndarray
    offsets: np.ndarray
    neighbors: np.ndarray
    label_universe_size: int
    label_values: tuple[int, ...] = field(default=())

    @classmethod
    def from_edges(
        cls,
        labels: Sequence[int],
        edges: Iterable[tuple[int, int]],
        label_universe_size: int | None = None,
        label_values: Sequence[int] | None = None,
    ) -> "LabeledGraph":
        labels_arr = np.asarray(labels, dtype=np.int64).reshape(-1)
        n = labels_arr.shape[0]
        if n and labels_arr.min() < 0:
            raise ValueError("labels must be non-negative")
        if label_universe_size is None:
            label_universe_size = int(labels_arr.max()) + 1 if n else 0
        if n and labels_arr.max() >= label_universe_size:
            raise ValueError("label id outside the label universe")

        adj: list[set[int]] = [set() for _ in range(n)]
        for a, b in edges:
            a, b = int(a), int(b)
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a}, {b}) references an unknown vertex")
            if a == b:
                raise ValueError(f"self-loop on vertex {a}")
            if b in adj[a]:
                raise ValueError(f"duplicate edge ({a}, {b})")
            adj[a].add(b)
            adj[b].add(a)

        degrees = np.fromiter((len(s) for s in adj), dtype=np.int64, count=n)
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(degrees, out=offsets[1:])
        neighbors = np.fromiter(
            (w for s in adj for w in sorted(s)), dtype=np.int64, count=int(offsets[-1])
        )
        if label_values is None:
            label_values = range(label_universe_size)
        return cls(
            labels=labels_arr,
            offsets=offsets,
            neighbors=neighbors,
            label_universe_size=int(label_universe_size),
            label_values=tuple(int(x) for x in label_values),
        )

    @property
    def vertex_count(self) -> int:
        return int(self.labels.shape[0])

    @property
    def edge_count(self) -> int:
        return int(self.offsets[-1]) // 2

    def __len__(self) -> int:
        return self.vertex_count

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def degree(self, u: int) -> int:
        return int(self.offsets[u + 1] - self.offsets[u])

    def neighbors_of(self, u: int) -> np.ndarray:
        return self.neighbors[self.offsets[u] : self.offsets[u + 1]]

    # Python-level views for the hot loops; numpy scalar access is slow there.
    @cached_property
    def adjacency_lists(self) -> tuple[tuple[int, ...], ...]:
        nbrs = self.neighbors.tolist()
        offs = self.offsets.tolist()
        return tuple(tuple(nbrs[offs[i] : offs[i + 1]]) for i in range(self.vertex_count))

    @cached_property
    def adjacency_sets(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(x) for x in self.adjacency_lists)

    @cached_property
    def label_list(self) -> list[int]:
        return self.labels.tolist()

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency_sets[u]

    def edges(self) -> list[tuple[int, int]]:
        """Each undirected edge once as ``(min, max)``, ascending."""
        return [(u, w) for u, nbrs in enumerate(self.adjacency_lists) for w in nbrs if u < w]

    def dense_adjacency(self) -> np.ndarray:
        n = self.vertex_count
        a = np.zeros((n, n), dtype=np.float64)
        rows = np.repeat(np.arange(n), self.degrees)
        a[rows, self.neighbors] = 1.0
        return a

    def original_label(self, dense: int) -> int:
        return self.label_values[dense]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabeledGraph):
            return NotImplemented
        return (
            self.label_universe_size == other.label_universe_size
            and self.label_values == other.label_values
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.neighbors, other.neighbors)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (
            f"LabeledGraph(vertices={self.vertex_count}, edges={self.edge_count}, "
            f"labels={self.label_universe_size})"
        )


def _parse_int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise MalformedLineError(lineno, f"expected an integer, got {tok!r}") from None


def load_graph(source: str | bytes | IO[str] | IO[bytes]) -> LabeledGraph:
    """Parse a graph from text (``str``/``bytes``) or an open stream."""
    if isinstance(source, bytes):
        source = source.decode("ascii")
    if isinstance(source, str):
        source = io.StringIO(source)

    header: tuple[int, int] | None = None
    raw_labels: list[int] = []
    declared_deg: list[int] = []
    vertex_line: list[int] = []
    adj: list[set[int]] = []
    edges_seen = 0

    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("ascii")
        parts = raw.split()
        if not parts:
            continue
        kind = parts[0]
        if header is None:
            if kind != "t" or len(parts) != 3:
                raise MalformedLineError(lineno, "first record must be 't <vertices> <edges>'")
            n, m = _parse_int(parts[1], lineno), _parse_int(parts[2], lineno)
            if n < 0 or m < 0:
                raise MalformedLineError(lineno, "negative vertex or edge count")
            header = (n, m)
            continue
        n, m = header
        if kind == "v":
            if len(parts) != 4:
                raise MalformedLineError(lineno, "vertex record must be 'v <id> <label> <degree>'")
            vid, lab, deg = (_parse_int(p, lineno) for p in parts[1:])
            if edges_seen:
                raise MalformedLineError(lineno, "vertex record after edge records")
            if vid < len(raw_labels):
                raise DuplicateVertexError(lineno, f"vertex {vid} declared twice")
            if vid != len(raw_labels) or vid >= n:
                raise MalformedLineError(lineno, f"vertex id {vid} out of sequence")
            if deg < 0:
                raise MalformedLineError(lineno, "negative degree")
            raw_labels.append(lab)
            declared_deg.append(deg)
            vertex_line.append(lineno)
            adj.append(set())
        elif kind == "e":
            if len(parts) != 3:
                raise MalformedLineError(lineno, "edge record must be 'e <src> <dst>'")
            a, b = _parse_int(parts[1], lineno), _parse_int(parts[2], lineno)
            for x in (a, b):
                if not 0 <= x < len(raw_labels):
                    raise UnknownVertexError(lineno, f"edge references unknown vertex {x}")
            if a == b:
                raise MalformedLineError(lineno, f"self-loop on vertex {a}")
            if b in adj[a]:
                raise DuplicateEdgeError(lineno, f"duplicate edge ({a}, {b})")
            adj[a].add(b)
            adj[b].add(a)
            edges_seen += 1
            if edges_seen > m:
                raise MalformedLineError(lineno, f"more than {m} edge records")
        else:
            raise MalformedLineError(lineno, f"unknown record type {kind!r}")

    if header is None:
        raise MalformedLineError(0, "empty input")
    n, m = header
    if len(raw_labels) != n:
        raise MalformedLineError(0, f"expected {n} vertex records, found {len(raw_labels)}")
    if edges_seen != m:
        raise MalformedLineError(0, f"expected {m} edge records, found {edges_seen}")
    for vid in range(n):
        if len(adj[vid]) != declared_deg[vid]:
            raise DegreeMismatchError(
                vertex_line[vid],
                f"declared degree {declared_deg[vid]} for vertex {vid}, actual {len(adj[vid])}",
            )

    dense: dict[int, int] = {}
    for lab in raw_labels:
        dense.setdefault(lab, len(dense))
    return LabeledGraph.from_edges(
        [dense[lab] for lab in raw_labels],
        ((a, b) for a in range(n) for b in adj[a] if a < b),
        label_universe_size=len(dense),
        label_values=list(dense),
    )


def read_graph(path: str | Path) -> LabeledGraph:
    with open(path, "rb") as fh:
        return load_graph(fh.read())


def save_graph(g: LabeledGraph) -> str:
    """Serialize in canonical form: vertices ascending, edges by (min, max)."""
    out = [f"t {g.vertex_count} {g.edge_count}"]
    degs = g.degrees.tolist()
    for v, lab in enumerate(g.label_list):
        out.append(f"v {v} {g.original_label(lab)} {degs[v]}")
    out.extend(f"e {a} {b}" for a, b in g.edges())
    return "\n".join(out) + "\n"


def write_graph(g: LabeledGraph, path: str | Path) -> None:
    Path(path).write_text(save_graph(g), encoding="ascii")


@dataclass(frozen=True, eq=False)
class GraphStats:
    """Label and degree statistics of a data graph."""

    vertex_count: int
    label_frequency: np.ndarray
    sorted_degrees: np.ndarray
    edge_label_pair_frequency: dict[tuple[int, int], int]

    def degree_exceed_count(self, k: int) -> int:
        """Number of vertices with degree strictly greater than ``k``."""
        return self.vertex_count - int(np.searchsorted(self.sorted_degrees, k, side="right"))

    def label_count(self, label: int) -> int:
        if 0 <= label < self.label_frequency.shape[0]:
            return int(self.label_frequency[label])
        return 0

    def edge_pair_count(self, a: int, b: int) -> int:
        return self.edge_label_pair_frequency.get((min(a, b), max(a, b)), 0)


def compute_stats(g: LabeledGraph) -> GraphStats:
    label_frequency = np.bincount(g.labels, minlength=g.label_universe_size).astype(np.int64)
    pairs: dict[tuple[int, int], int] = {}
    labs = g.label_list
    for a, b in g.edges():
        key = (min(labs[a], labs[b]), max(labs[a], labs[b]))
        pairs[key] = pairs.get(key, 0) + 1
    return GraphStats(
        vertex_count=g.vertex_count,
        label_frequency=label_frequency,
        sorted_degrees=np.sort(g.degrees),
        edge_label_pair_frequency=pairs,
    )


def align_labels(q: LabeledGraph, g: LabeledGraph) -> LabeledGraph:
    """Re-express ``q``'s labels in ``g``'s dense label space.

    Labels of ``q`` that never occur in ``g`` get fresh ids past ``g``'s
    universe; such vertices simply have no candidates.
    """
    if q.label_values == g.label_values[: len(q.label_values)]:
        return q
    lookup = {orig: i for i, orig in enumerate(g.label_values)}
    values = list(g.label_values)
    remap = []
    for orig in q.label_values:
        if orig not in lookup:
            lookup[orig] = len(values)
            values.append(orig)
        remap.append(lookup[orig])
    labels = [remap[x] for x in q.label_list]
    return LabeledGraph.from_edges(labels, q.edges(), len(values), values)


def induced_subgraph(g: LabeledGraph, vertices: Sequence[int]) -> LabeledGraph:
    """Induced subgraph on ``vertices``, re-indexed in the given order."""
    index = {int(v): i for i, v in enumerate(vertices)}
    if len(index) != len(vertices):
        raise ValueError("vertex set contains duplicates")
    edges = []
    for v, i in index.items():
        for w in g.adjacency_lists[v]:
            j = index.get(w)
            if j is not None and i < j:
                edges.append((i, j))
    labels = [g.label_list[v] for v in index]
    return LabeledGraph.from_edges(labels, edges, g.label_universe_size, g.label_values)


def sample_connected_vertices(
    g: LabeledGraph, size: int, rng_seed: int, max_retries: int = 100
) -> list[int]:
    """Grow a connected vertex set by random frontier expansion.

    Starts at a uniform random vertex and repeatedly adds a uniform random
    vertex adjacent to the current set. Restarts from a fresh start vertex
    when the component is exhausted early. Returned ids are sorted.
    """
    if not 1 <= size <= g.vertex_count:
        raise ValueError(f"size must lie in [1, {g.vertex_count}], got {size}")
    rng = np.random.default_rng(rng_seed)
    adj = g.adjacency_lists
    for _ in range(max_retries):
        start = int(rng.integers(g.vertex_count))
        chosen = [start]
        members = {start}
        frontier: list[int] = []
        in_frontier: set[int] = set()
        for w in adj[start]:
            frontier.append(w)
            in_frontier.add(w)
        while len(chosen) < size and frontier:
            # frontier is kept sorted so the draw depends only on the set
            frontier.sort()
            v = frontier.pop(int(rng.integers(len(frontier))))
            in_frontier.discard(v)
            chosen.append(v)
            members.add(v)
            for w in adj[v]:
                if w not in members and w not in in_frontier:
                    frontier.append(w)
                    in_frontier.add(w)
        if len(chosen) == size:
            return sorted(chosen)
    raise ExtractionError(
        f"no connected {size}-vertex subgraph found after {max_retries} attempts"
    )


def extract_connected_query(
    g: LabeledGraph, size: int, rng_seed: int, max_retries: int = 100
) -> LabeledGraph:
    """Random connected induced subgraph of ``g`` with ``size`` vertices."""
    return induced_subgraph(g, sample_connected_vertices(g, size, rng_seed, max_retries))


def is_connected(g: LabeledGraph) -> bool:
    n = g.vertex_count
    if n <= 1:
        return True
    seen = {0}
    stack = [0]
    adj = g.adjacency_lists
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n
