"""Undirected graphs, edge contexts, and the blanket partitions they induce.

A contextual structure is an undirected graph plus, per edge, a set of
configurations of the edge's common neighbors under which the direct
influence of the edge is switched off.  Structures are immutable values;
mutation helpers return new objects.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CapacityError, StructureError

Edge = tuple[int, int]
Element = tuple[int, ...]

MAX_BLANKET_CONFIGS = 1 << 16


def _canonical_edge(i: int, j: int) -> Edge:
    if i == j:
        raise StructureError(f"self-loop on node {i}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class UndirectedGraph:
    """Simple undirected graph over nodes 0..d-1 with canonically stored edges."""

    d: int
    edges: frozenset[Edge]
    _neighbors: tuple[tuple[int, ...], ...] = field(
        init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d < 1:
            raise StructureError(f"graph needs at least one node, got d={self.d}")
        adj: list[set[int]] = [set() for _ in range(self.d)]
        for e in self.edges:
            i, j = e
            if not (0 <= i < j < self.d):
                raise StructureError(f"edge {e} is not canonical for d={self.d}")
            adj[i].add(j)
            adj[j].add(i)
        object.__setattr__(self, "_neighbors", tuple(tuple(sorted(s)) for s in adj))

    @classmethod
    def from_edges(cls, d: int, edges: Iterable[Sequence[int]]) -> "UndirectedGraph":
        return cls(d, frozenset(_canonical_edge(int(i), int(j)) for i, j in edges))

    @classmethod
    def empty(cls, d: int) -> "UndirectedGraph":
        return cls(d, frozenset())

    @classmethod
    def complete(cls, d: int) -> "UndirectedGraph":
        return cls.from_edges(d, itertools.combinations(range(d), 2))

    def neighbors(self, j: int) -> tuple[int, ...]:
        """Markov blanket of node j: its adjacent nodes, ascending."""
        return self._neighbors[j]

    def has_edge(self, i: int, j: int) -> bool:
        return _canonical_edge(i, j) in self.edges

    def toggle_edge(self, i: int, j: int) -> "UndirectedGraph":
        e = _canonical_edge(i, j)
        edges = self.edges - {e} if e in self.edges else self.edges | {e}
        return UndirectedGraph(self.d, edges)

    def sorted_edges(self) -> tuple[Edge, ...]:
        return tuple(sorted(self.edges))

    def is_complete_subset(self, nodes: Iterable[int]) -> bool:
        nodes = tuple(nodes)
        return all(self.has_edge(a, b) for a, b in itertools.combinations(nodes, 2))


def neighbors_graphs(g: UndirectedGraph) -> list[UndirectedGraph]:
    """All d(d-1)/2 graphs reachable by toggling one edge, in pair order."""
    return [g.toggle_edge(i, j) for i, j in itertools.combinations(range(g.d), 2)]


def common_neighbors(g: UndirectedGraph, i: int, j: int) -> tuple[int, ...]:
    """Ascending intersection of the two nodes' blankets."""
    if i == j:
        raise StructureError("common neighbors are undefined for a single node")
    return tuple(sorted(set(g.neighbors(i)) & set(g.neighbors(j))))


@dataclass(frozen=True)
class EdgeContext:
    """Configurations of the common neighbors of one edge, ascending coordinate order."""

    edge: Edge
    elements: frozenset[Element]


class ContextualStructure:
    """An undirected graph plus per-edge contexts; edges without entry have empty context.

    Context elements are tuples over the edge's *current* common neighbors in
    ascending node order; elements whose arity does not match are rejected,
    which is how contexts left stale by an edge mutation surface as errors.
    """

    __slots__ = ("graph", "_contexts")

    def __init__(self, graph: UndirectedGraph,
                 contexts: Mapping[Edge, Iterable[Element]] | None = None):
        self.graph = graph
        normalized: dict[Edge, frozenset[Element]] = {}
        for edge, elements in (contexts or {}).items():
            e = _canonical_edge(int(edge[0]), int(edge[1]))
            elems = frozenset(tuple(int(v) for v in el) for el in elements)
            if not elems:
                continue
            if e not in graph.edges:
                raise StructureError(f"context on missing edge {e}")
            cn = common_neighbors(graph, *e)
            for el in elems:
                if len(el) != len(cn):
                    raise StructureError(
                        f"context element {el} on edge {e} has arity {len(el)}, "
                        f"but cn{e} = {cn}")
            normalized[e] = elems
        self._contexts = normalized

    @classmethod
    def empty(cls, graph: UndirectedGraph) -> "ContextualStructure":
        return cls(graph, {})

    @property
    def d(self) -> int:
        return self.graph.d

    def context(self, i: int, j: int) -> frozenset[Element]:
        return self._contexts.get(_canonical_edge(i, j), frozenset())

    def context_items(self) -> tuple[tuple[Edge, frozenset[Element]], ...]:
        return tuple(sorted(self._contexts.items()))

    def edge_contexts(self) -> tuple[EdgeContext, ...]:
        return tuple(EdgeContext(e, els) for e, els in self.context_items())

    def total_context_elements(self) -> int:
        return sum(len(els) for els in self._contexts.values())

    def with_context_element(self, edge: Edge, element: Element) -> "ContextualStructure":
        e = _canonical_edge(*edge)
        contexts = dict(self._contexts)
        contexts[e] = contexts.get(e, frozenset()) | {tuple(element)}
        return ContextualStructure(self.graph, contexts)

    def node_context_key(self, j: int) -> tuple:
        """Canonical form of the contexts on edges incident to j (cache key part)."""
        items = []
        for i in self.graph.neighbors(j):
            elems = self._contexts.get(_canonical_edge(i, j))
            if elems:
                items.append((i, tuple(sorted(elems))))
        return tuple(items)

    def canonical_key(self) -> tuple:
        return (self.graph.d, tuple(self.graph.sorted_edges()),
                tuple((e, tuple(sorted(els))) for e, els in self.context_items()))

    def __eq__(self, other) -> bool:
        return (isinstance(other, ContextualStructure)
                and self.canonical_key() == other.canonical_key())

    def __hash__(self) -> int:
        return hash(self.canonical_key())

    def __repr__(self) -> str:
        return (f"ContextualStructure(d={self.d}, edges={sorted(self.graph.edges)}, "
                f"contexts={dict(self.context_items())})")


@dataclass(frozen=True, eq=False)
class BlanketPartition:
    """Partition of a node's blanket outcome space into invariance classes.

    ``classes[c]`` is the class id of the blanket configuration with
    row-major index c over the blanket's outcome space (blanket ascending);
    ids are 0..q-1 ordered by each class's lexicographically smallest member.
    """

    node: int
    blanket: tuple[int, ...]
    classes: np.ndarray
    q: int

    def __post_init__(self):
        object.__setattr__(self, "classes", np.ascontiguousarray(self.classes, dtype=np.int32))
        used = np.unique(self.classes)
        if self.q < 1 or len(used) != self.q or used[0] != 0 or used[-1] != self.q - 1:
            raise StructureError("class ids must be exactly 0..q-1, all used")

    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.classes, minlength=self.q)


def _radix_weights(cards: Sequence[int]) -> np.ndarray:
    """Row-major mixed-radix weights: first coordinate most significant."""
    weights = np.ones(len(cards), dtype=np.int64)
    for t in range(len(cards) - 2, -1, -1):
        weights[t] = weights[t + 1] * cards[t + 1]
    return weights


def build_blanket_partition(structure: ContextualStructure, cards: Sequence[int],
                            j: int) -> BlanketPartition:
    """Merge blanket configurations forced to share a conditional distribution.

    Starting from singletons over the blanket outcome space, each element
    x on the context of edge {i, j} merges, for every fixed configuration of
    the remaining blanket coordinates, the configurations that match x on
    cn(i, j) and differ only in coordinate i.
    """
    graph = structure.graph
    mb = graph.neighbors(j)
    blanket_cards = [cards[i] for i in mb]
    total = math.prod(blanket_cards)
    if total > MAX_BLANKET_CONFIGS:
        raise CapacityError(
            f"blanket of node {j} spans {total} configurations, above the "
            f"{MAX_BLANKET_CONFIGS} guard")
    weights = _radix_weights(blanket_cards)
    pos = {i: t for t, i in enumerate(mb)}

    parent = list(range(total))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for i in mb:
        elements = structure.context(i, j)
        if not elements:
            continue
        cn = common_neighbors(graph, i, j)
        cn_pos = [pos[c] for c in cn]
        i_pos = pos[i]
        free_pos = [t for t in range(len(mb)) if t != i_pos and t not in cn_pos]
        free_ranges = [range(blanket_cards[t]) for t in free_pos]
        step_i = int(weights[i_pos])
        for el in sorted(elements):
            if len(el) != len(cn):
                raise StructureError(
                    f"context element {el} on edge {tuple(sorted((i, j)))} does not "
                    f"match cn = {cn}")
            for t, v in zip(cn_pos, el):
                if not 0 <= v < blanket_cards[t]:
                    raise StructureError(
                        f"context element {el} has coordinate {v} outside the "
                        f"cardinality of node {mb[t]}")
            base = int(sum(weights[t] * v for t, v in zip(cn_pos, el)))
            for free_vals in itertools.product(*free_ranges):
                offset = base + int(sum(weights[t] * v for t, v in zip(free_pos, free_vals)))
                first = offset
                for v in range(1, cards[i]):
                    union(first, offset + v * step_i)

    classes = np.empty(total, dtype=np.int32)
    next_id = 0
    seen: dict[int, int] = {}
    for c in range(total):
        root = find(c)
        if root not in seen:
            seen[root] = next_id
            next_id += 1
        classes[c] = seen[root]
    return BlanketPartition(j, mb, classes, next_id)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of structural validation: empty violations means valid."""

    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_structure(structure: ContextualStructure,
                       cards: Sequence[int]) -> ValidationReport:
    """Check every edge-context invariant; regularity means a strict subset.

    Maximality is not checked: it is emergent from score-based search and has
    no syntactic test here.
    """
    graph = structure.graph
    problems: list[str] = []
    if len(cards) != graph.d:
        problems.append(
            f"structure has {graph.d} nodes but {len(cards)} cardinalities given")
        return ValidationReport(tuple(problems))
    for edge, elements in structure.context_items():
        cn = common_neighbors(graph, *edge)
        if not cn and elements:
            problems.append(f"edge {edge}: context nonempty but cn is empty")
            continue
        full = math.prod(cards[c] for c in cn)
        ok_elements = True
        for el in sorted(elements):
            if len(el) != len(cn):
                problems.append(f"edge {edge}: element {el} does not match cn {cn}")
                ok_elements = False
                continue
            for c, v in zip(cn, el):
                if not 0 <= v < cards[c]:
                    problems.append(
                        f"edge {edge}: element {el} coordinate {v} outside range of node {c}")
                    ok_elements = False
        if ok_elements and len(elements) >= full:
            problems.append(
                f"edge {edge}: context covers all {full} common-neighbor "
                "configurations (regularity violation)")
    return ValidationReport(tuple(problems))


def _compress_elements(elements: frozenset[Element],
                       cn_cards: Sequence[int]) -> list[tuple]:
    """Star-compress configurations: a coordinate spanning its range becomes '*'."""
    patterns: set[tuple] = {tuple(el) for el in elements}
    changed = True
    while changed:
        changed = False
        for t in range(len(cn_cards)):
            groups: dict[tuple, set[int]] = {}
            for pat in patterns:
                if pat[t] == "*":
                    continue
                key = pat[:t] + ("*",) + pat[t + 1:]
                groups.setdefault(key, set()).add(pat[t])
            for key, vals in groups.items():
                if len(vals) == cn_cards[t]:
                    patterns -= {key[:t] + (v,) + key[t + 1:] for v in vals}
                    patterns.add(key)
                    changed = True

    def sort_key(pat):
        return tuple((1, 0) if v == "*" else (0, v) for v in pat)

    return sorted(patterns, key=sort_key)


def render_labeled_graph(structure: ContextualStructure,
                         cards: Sequence[int]) -> str:
    """One line per edge with a nonempty context: ``i–j: {configs}``.

    Configurations concatenate digits when all common-neighbor cardinalities
    are below ten (star for a full range); otherwise they are parenthesized
    comma-separated tuples.  Edges with empty contexts are omitted.
    """
    lines = []
    for edge, elements in structure.context_items():
        cn = common_neighbors(structure.graph, *edge)
        cn_cards = [cards[c] for c in cn]
        compact = all(r <= 10 for r in cn_cards)
        rendered = []
        for pat in _compress_elements(elements, cn_cards):
            if compact:
                rendered.append("".join(str(v) for v in pat))
            else:
                rendered.append("(" + ",".join(str(v) for v in pat) + ")")
        lines.append(f"{edge[0]}–{edge[1]}: {{{','.join(rendered)}}}")
    return "\n".join(lines)


def structure_to_json_dict(structure: ContextualStructure,
                           cards: Sequence[int]) -> dict:
    """Canonical persisted form: d, cardinalities, edges, contexts (with cn)."""
    contexts = []
    for edge, elements in structure.context_items():
        cn = common_neighbors(structure.graph, *edge)
        contexts.append({
            "edge": list(edge),
            "cn": list(cn),
            "elements": [list(el) for el in sorted(elements)],
        })
    return {
        "d": structure.d,
        "cardinalities": [int(r) for r in cards],
        "edges": [list(e) for e in structure.graph.sorted_edges()],
        "contexts": contexts,
    }


def structure_from_json_dict(obj: dict) -> tuple[ContextualStructure, tuple[int, ...]]:
    """Parse and validate the canonical structure JSON; stale contexts are rejected."""
    try:
        d = int(obj["d"])
        cards = tuple(int(r) for r in obj["cardinalities"])
        graph = UndirectedGraph.from_edges(d, obj["edges"])
        contexts = {}
        for entry in obj.get("contexts", []):
            edge = _canonical_edge(int(entry["edge"][0]), int(entry["edge"][1]))
            contexts[edge] = [tuple(int(v) for v in el) for el in entry["elements"]]
            declared_cn = tuple(int(c) for c in entry.get("cn", ()))
            actual_cn = common_neighbors(graph, *edge)
            if entry.get("cn") is not None and declared_cn != actual_cn:
                raise StructureError(
                    f"edge {edge}: stored cn {declared_cn} does not match the "
                    f"graph's cn {actual_cn}")
    except (KeyError, IndexError, TypeError) as exc:
        raise StructureError(f"malformed structure JSON: {exc}") from exc
    structure = ContextualStructure(graph, contexts)
    report = validate_structure(structure, cards)
    if not report.ok:
        raise StructureError("; ".join(report.violations))
    return structure, cards
