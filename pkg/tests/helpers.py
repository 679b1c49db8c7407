"""Shared fixtures and independent oracles used across the test suite.

The oracles deliberately take different computational routes from the library
code: partition closure by repeated pairwise scanning, marginal likelihood by
the sequential predictive product in exact rational arithmetic, and chordal
maximum likelihood by clique/separator factorization.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

import cmnlearn as cm

# ---------------------------------------------------------------------------
# Worked figures (0-based translations of the running examples)

def six_node_graph() -> cm.UndirectedGraph:
    """Six-node graph with one isolated node and a chordless 4-cycle."""
    return cm.UndirectedGraph.from_edges(
        6, [(0, 1), (1, 2), (0, 3), (1, 4), (2, 4), (3, 4)])


def six_node_structure() -> cm.ContextualStructure:
    """The six-node graph with contexts on edges (1,4) and (2,4)."""
    return cm.ContextualStructure(
        six_node_graph(), {(1, 4): [(0,)], (2, 4): [(1,), (2,)]})


def four_node_structure() -> cm.ContextualStructure:
    """Complete graph over four binary nodes with two labeled edges."""
    graph = cm.UndirectedGraph.complete(4)
    return cm.ContextualStructure(
        graph, {(0, 2): [(0, 1), (1, 0)], (1, 3): [(1, 0), (1, 1)]})


SYNTHETIC_EDGES = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (2, 4),
                   (3, 4), (4, 5), (4, 6), (5, 6)]
SYNTHETIC_CONTEXTS = {
    (0, 1): [(1, 0)],
    (0, 2): [(1, 0), (1, 1)],
    (3, 4): [(0,)],
    (4, 6): [(0,)],
    (5, 6): [(1,)],
}
# Interaction strengths chosen so every edge is clearly active in each
# non-context configuration of its common neighbors, with main effects tuned
# once to balance all marginals at 1/2 (frozen literals).
_SYNTH_A, _SYNTH_B, _SYNTH_C, _SYNTH_E = 1.2, -0.8, -0.4, 0.5
_SYNTH_S2, _SYNTH_S3 = 1.5, -1.5
SYNTHETIC_MAINS = (0.1441, 0.5536, -1.4191, -1.1236, -0.7472, -0.8444, -0.3581)


def synthetic_structure() -> cm.ContextualStructure:
    graph = cm.UndirectedGraph.from_edges(7, SYNTHETIC_EDGES)
    return cm.ContextualStructure(graph, SYNTHETIC_CONTEXTS)


def synthetic_phi() -> dict:
    a, b, c, e = _SYNTH_A, _SYNTH_B, _SYNTH_C, _SYNTH_E
    s2, s3 = _SYNTH_S2, _SYNTH_S3
    phi = {
        ((0, 1), (1, 1)): -a, ((0, 2), (1, 1)): -a, ((0, 3), (1, 1)): 1.6,
        ((1, 2), (1, 1)): 1.0, ((1, 3), (1, 1)): -1.3, ((2, 3), (1, 1)): 0.8,
        ((2, 4), (1, 1)): 0.7, ((3, 4), (1, 1)): 0.0, ((4, 5), (1, 1)): 0.8,
        ((4, 6), (1, 1)): 0.0, ((5, 6), (1, 1)): -s3,
        ((0, 1, 2), (1, 1, 1)): a, ((0, 1, 3), (1, 1, 1)): b,
        ((0, 2, 3), (1, 1, 1)): -c, ((1, 2, 3), (1, 1, 1)): e,
        ((2, 3, 4), (1, 1, 1)): s2, ((4, 5, 6), (1, 1, 1)): s3,
        ((0, 1, 2, 3), (1, 1, 1, 1)): c,
    }
    for j, v in enumerate(SYNTHETIC_MAINS):
        phi[((j,), (1,))] = v
    return phi


def synthetic_generator() -> tuple[cm.ContextualStructure, cm.LogLinearModel, cm.JointTable]:
    structure = synthetic_structure()
    cards = (2,) * 7
    model = cm.build_model(structure, cards, synthetic_phi())
    return structure, model, cm.joint_of(model)


# ---------------------------------------------------------------------------
# Enumeration of all structures over few nodes

def all_structures(d: int, cards) -> list[cm.ContextualStructure]:
    """Every graph over d nodes with every regular context combination."""
    structures = []
    pairs = list(itertools.combinations(range(d), 2))
    for mask in range(1 << len(pairs)):
        edges = [pairs[t] for t in range(len(pairs)) if mask >> t & 1]
        graph = cm.UndirectedGraph.from_edges(d, edges)
        spaces = []
        for edge in edges:
            cn = cm.common_neighbors(graph, *edge)
            if not cn:
                spaces.append([frozenset()])
                continue
            full = list(itertools.product(*(range(cards[c]) for c in cn)))
            choices = []
            for size in range(len(full)):  # strict subsets only (regularity)
                choices.extend(frozenset(c) for c in itertools.combinations(full, size))
            spaces.append(choices)
        for combo in itertools.product(*spaces):
            contexts = {e: els for e, els in zip(edges, combo) if els}
            structures.append(cm.ContextualStructure(graph, contexts))
    return structures


# ---------------------------------------------------------------------------
# Partition oracle: repeated pairwise scanning until fixpoint

def brute_force_partition(structure: cm.ContextualStructure, cards, j: int,
                          rule_order_seed: int | None = None) -> dict:
    """Class mapping over blanket configurations by exhaustive pair merging.

    Scans all configuration pairs and merges any pair related by some context
    element until no change; independent of the union-find implementation.
    """
    graph = structure.graph
    mb = graph.neighbors(j)
    blanket_cards = [cards[i] for i in mb]
    configs = list(itertools.product(*(range(r) for r in blanket_cards)))
    labels = {c: idx for idx, c in enumerate(configs)}
    pos = {i: t for t, i in enumerate(mb)}
    rules = []
    for i in mb:
        cn = cm.common_neighbors(graph, i, j)
        for element in sorted(structure.context(i, j)):
            rules.append((i, dict(zip(cn, element))))
    if rule_order_seed is not None:
        rng = np.random.default_rng(rule_order_seed)
        rng.shuffle(rules)
    changed = True
    while changed:
        changed = False
        for c1, c2 in itertools.combinations(configs, 2):
            if labels[c1] == labels[c2]:
                continue
            for i, fixed in rules:
                if (all(c1[pos[k]] == v and c2[pos[k]] == v for k, v in fixed.items())
                        and all(c1[t] == c2[t]
                                for t in range(len(mb)) if t != pos[i])):
                    old, new = labels[c1], labels[c2]
                    for c in configs:
                        if labels[c] == old:
                            labels[c] = new
                    changed = True
                    break
    # canonicalize: ids by lexicographically smallest member
    remap: dict[int, int] = {}
    canonical = {}
    for c in configs:
        root = labels[c]
        if root not in remap:
            remap[root] = len(remap)
        canonical[c] = remap[root]
    return canonical


# ---------------------------------------------------------------------------
# Marginal likelihood oracle: sequential predictive product, exact rationals

def oracle_log_mpl(rows, cards, structure: cm.ContextualStructure,
                   alpha: Fraction = Fraction(1, 2),
                   partitions: dict | None = None) -> float:
    """chain-rule product of Dirichlet-multinomial predictive probabilities."""
    total = Fraction(1)
    for j in range(len(cards)):
        if partitions is not None and j in partitions:
            mb, mapping = partitions[j]
        else:
            mb = structure.graph.neighbors(j)
            mapping = brute_force_partition(structure, cards, j)
            if partitions is not None:
                partitions[j] = (mb, mapping)
        r = cards[j]
        alpha_total = r * alpha
        counts: dict[int, list[int]] = {}
        for row in rows:
            label = mapping[tuple(row[i] for i in mb)]
            vec = counts.setdefault(label, [0] * r)
            total *= (vec[row[j]] + alpha) / (sum(vec) + alpha_total)
            vec[row[j]] += 1
    return math.log(total)


# ---------------------------------------------------------------------------
# Chordal maximum likelihood oracle: clique/separator factorization

def junction_tree_joint(graph: cm.UndirectedGraph, table: cm.JointTable) -> np.ndarray:
    """MLE joint of a chordal graph: product of clique marginals over separators."""
    import networkx as nx

    gx = nx.Graph()
    gx.add_nodes_from(range(graph.d))
    gx.add_edges_from(graph.edges)
    assert nx.is_chordal(gx), "oracle requires a chordal graph"
    cliques = [tuple(sorted(c)) for c in nx.chordal_graph_cliques(gx)]
    clique_graph = nx.Graph()
    clique_graph.add_nodes_from(cliques)
    for c1, c2 in itertools.combinations(cliques, 2):
        weight = len(set(c1) & set(c2))
        if weight:
            clique_graph.add_edge(c1, c2, weight=weight)
    tree = nx.maximum_spanning_tree(clique_graph)

    probs = table.probabilities

    def marginal(nodes: tuple[int, ...]) -> np.ndarray:
        axes = tuple(a for a in range(graph.d) if a not in nodes)
        return probs.sum(axis=axes)

    result = np.ones_like(probs)
    for clique in cliques:
        marg = marginal(clique)
        shape = [table.cardinalities[a] if a in clique else 1 for a in range(graph.d)]
        result = result * marg.reshape(shape)
    for c1, c2 in tree.edges:
        sep = tuple(sorted(set(c1) & set(c2)))
        marg = marginal(sep)
        shape = [table.cardinalities[a] if a in sep else 1 for a in range(graph.d)]
        with np.errstate(divide="ignore", invalid="ignore"):
            result = np.where(marg.reshape(shape) > 0,
                              result / marg.reshape(shape), 0.0)
    return result


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def random_dataset(rng: np.random.Generator, n: int, cards) -> cm.Dataset:
    values = np.stack([rng.integers(0, r, size=n) for r in cards], axis=1)
    return cm.Dataset(values, tuple(cards), tuple(f"x{j}" for j in range(len(cards))))


def three_var_context_truth() -> tuple[cm.ContextualStructure, cm.JointTable]:
    """Binary triangle where the (0,1) interaction is cut when X2=0."""
    graph = cm.UndirectedGraph.complete(3)
    structure = cm.ContextualStructure(graph, {(0, 1): [(0,)]})
    phi = {
        ((0,), (1,)): 0.1, ((1,), (1,)): -0.1, ((2,), (1,)): 0.0,
        ((0, 1), (1, 1)): 0.0, ((0, 2), (1, 1)): 1.2, ((1, 2), (1, 1)): -1.2,
        ((0, 1, 2), (1, 1, 1)): -1.6,
    }
    model = cm.build_model(structure, (2, 2, 2), phi)
    return structure, cm.joint_of(model)
