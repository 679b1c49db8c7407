"""Greedy structure search: context hill-climb nested inside a graph hill-climb,
plus a prior-strength sweep with BIC-based final model selection.

Both climbs use a fixed canonical scan order (edges by pair, elements
lexicographic) and treat score differences within ``TIE_EPS`` as ties that
keep the incumbent, so results are deterministic for a given dataset and
configuration.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .data import DEFAULT_TABLE_CAP, Dataset
from .model import (ContextualStructure, UndirectedGraph, common_neighbors,
                    validate_structure)
from .params import fit_mle, model_dimension
from .scoring import TIE_EPS, MplScorer, ScoreConfig, ScoredModel, log_context_prior


def _candidate_elements(graph: UndirectedGraph, cards: Sequence[int],
                        edge: tuple[int, int]) -> list[tuple[int, ...]]:
    """Lexicographic outcome space of the edge's common neighbors (empty if none)."""
    cn = common_neighbors(graph, *edge)
    if not cn:
        return []
    return list(itertools.product(*(range(cards[c]) for c in cn)))


def context_hill_climb(dataset: Dataset, graph: UndirectedGraph,
                       config: ScoreConfig, scorer: MplScorer | None = None,
                       debug: bool = False) -> ContextualStructure:
    """Grow edge contexts greedily from the empty context.

    Each sweep scans every edge's unused common-neighbor configurations in
    canonical order and accepts a candidate whenever it beats the running
    best of the sweep; additions that would cover the full outcome space are
    never proposed (regularity).  A candidate's score delta involves only the
    two edge nodes, so after an accepted change only candidates on
    overlapping edges are re-evaluated; the rest keep their cached delta.
    """
    structure = ContextualStructure.empty(graph)
    if config.kappa_is_epsilon:
        return structure
    if scorer is None:
        scorer = MplScorer(dataset, config)
    cards = dataset.cardinalities

    edges = graph.sorted_edges()
    spaces = {edge: _candidate_elements(graph, cards, edge) for edge in edges}
    node_score = {j: scorer.node_score(structure, j) for j in range(graph.d)}
    running = sum(node_score.values())  # total score; prior of the empty context is 0
    delta_cache: dict[tuple, float] = {}

    max_sweeps = max(1, 10 * graph.d * graph.d)
    for _ in range(max_sweeps):
        best_delta = 0.0
        best: tuple[tuple[int, int], tuple[int, ...]] | None = None
        for edge in edges:
            space = spaces[edge]
            if not space:
                continue
            current = structure.context(*edge)
            if len(current) + 1 >= len(space):
                continue  # one more element would cover the full space
            i, j = edge
            prior_delta = (cards[i] - 1) * (cards[j] - 1) * config.log_kappa
            for element in space:
                if element in current:
                    continue
                key = (edge, element)
                delta = delta_cache.get(key)
                if delta is None:
                    candidate = structure.with_context_element(edge, element)
                    delta = (scorer.node_score(candidate, i) - node_score[i]
                             + scorer.node_score(candidate, j) - node_score[j]
                             + prior_delta)
                    delta_cache[key] = delta
                if delta > best_delta + TIE_EPS:
                    best_delta = delta
                    best = (edge, element)
        if best is None:
            break
        edge, element = best
        structure = structure.with_context_element(edge, element)
        for v in edge:
            node_score[v] = scorer.node_score(structure, v)
        running += best_delta
        if debug:
            full = (sum(scorer.node_score_uncached(structure, j) for j in range(graph.d))
                    + log_context_prior(structure, cards, config))
            assert abs(full - running) < 1e-9, (full, running)
        stale = [key for key in delta_cache if key[0][0] in edge or key[0][1] in edge]
        for key in stale:
            del delta_cache[key]
    return structure


def _total_score(scorer: MplScorer, structure: ContextualStructure,
                 config: ScoreConfig) -> float:
    total, _ = scorer.log_mpl(structure)
    return total + log_context_prior(structure, scorer.dataset.cardinalities, config)


def graph_hill_climb(dataset: Dataset, config: ScoreConfig,
                     scorer: MplScorer | None = None, threads: int = 1,
                     debug: bool = False) -> ScoredModel:
    """Hill-climb over graphs from the empty graph, refitting contexts per neighbor.

    Every sweep evaluates all single-edge toggles of the incumbent graph (each
    with a fresh context climb) and moves to the best strictly improving
    neighbor; ties keep the incumbent, then favor the earlier neighbor in
    canonical pair order.
    """
    if scorer is None:
        scorer = MplScorer(dataset, config)
    d = dataset.d
    incumbent = ContextualStructure.empty(UndirectedGraph.empty(d))
    incumbent_score = _total_score(scorer, incumbent, config)

    def evaluate(graph: UndirectedGraph) -> tuple[ContextualStructure, float]:
        candidate = context_hill_climb(dataset, graph, config, scorer, debug=debug)
        return candidate, _total_score(scorer, candidate, config)

    pairs = list(itertools.combinations(range(d), 2))
    max_sweeps = max(1, 10 * d * d)
    for _ in range(max_sweeps):
        neighbor_graphs = [incumbent.graph.toggle_edge(i, j) for i, j in pairs]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(evaluate, neighbor_graphs))
        else:
            results = [evaluate(g) for g in neighbor_graphs]
        best_structure, best_score = None, incumbent_score
        for candidate, score in results:
            if score > best_score + TIE_EPS:
                best_structure, best_score = candidate, score
        if best_structure is None:
            break
        incumbent, incumbent_score = best_structure, best_score
    report = validate_structure(incumbent, dataset.cardinalities)
    assert report.ok, report.violations
    total_mpl, breakdown = scorer.log_mpl(incumbent)
    return ScoredModel(structure=incumbent, log_mpl=total_mpl,
                       log_prior=log_context_prior(incumbent, dataset.cardinalities,
                                                   config),
                       log_mpl_breakdown=breakdown)


def default_kappa_grid(n: int) -> list[str | float]:
    """The standard prior grid: forbidden contexts plus n^-1, n^-1/2, n^-1/4."""
    return ["eps", n ** -1.0, n ** -0.5, n ** -0.25]


def kappa_label(kappa: str | float, n: int) -> str:
    if kappa == "eps":
        return "eps"
    for exponent, label in ((-1.0, "n^-1"), (-0.5, "n^-1/2"), (-0.25, "n^-1/4")):
        if math.isclose(kappa, n ** exponent, rel_tol=1e-12):
            return label
    return repr(float(kappa))


@dataclass(frozen=True)
class SweepResult:
    """Outcome of the prior sweep: all fitted models, the BIC winner, and the
    context-free model (labeled MN) for comparison reporting."""

    models: tuple[ScoredModel, ...]
    selected: ScoredModel
    mn: ScoredModel


def kappa_sweep(dataset: Dataset, kappa_grid: Sequence[str | float] | None = None,
                alpha: float = 0.5, fit_tolerance: float = 1e-8,
                fit_max_iter: int = 200, smoothing: float = 1e-6,
                cap: int = DEFAULT_TABLE_CAP, threads: int = 1,
                debug: bool = False) -> SweepResult:
    """Learn one structure per prior strength, fit MLEs, and pick the BIC argmax.

    One MPL node-score cache serves the whole grid since node scores depend
    on alpha only.  When the grid lacks the context-forbidding entry, an
    extra run produces the MN comparison model without participating in
    selection.
    """
    if kappa_grid is None:
        kappa_grid = default_kappa_grid(dataset.n)
    if not list(kappa_grid):
        raise ValueError("kappa grid must not be empty")

    scorer = MplScorer(dataset, ScoreConfig(alpha=alpha))

    def learn(kappa: str | float) -> ScoredModel:
        if kappa == "eps":
            config = ScoreConfig(alpha=alpha, kappa_is_epsilon=True)
        else:
            config = ScoreConfig(alpha=alpha, kappa=float(kappa))
        result = graph_hill_climb(dataset, config, scorer, threads=threads, debug=debug)
        model, log_lik = fit_mle(dataset, result.structure, tolerance=fit_tolerance,
                                 max_iter=fit_max_iter, smoothing=smoothing, cap=cap)
        dimension = model_dimension(result.structure, dataset.cardinalities)
        fitted = result.with_fit(model, log_lik, dimension, dataset.n)
        return ScoredModel(structure=fitted.structure, log_mpl=fitted.log_mpl,
                           log_prior=fitted.log_prior,
                           kappa_label=kappa_label(kappa, dataset.n),
                           dimension=fitted.dimension, log_lik=fitted.log_lik,
                           bic=fitted.bic, sbic=fitted.sbic, n=fitted.n,
                           model=fitted.model,
                           log_mpl_breakdown=fitted.log_mpl_breakdown)

    models = tuple(learn(kappa) for kappa in kappa_grid)
    selected = models[0]
    for candidate in models[1:]:
        if candidate.bic > selected.bic:
            selected = candidate
    mn_models = [m for m, kappa in zip(models, kappa_grid) if kappa == "eps"]
    mn = mn_models[0] if mn_models else learn("eps")
    return SweepResult(models, selected, mn)
