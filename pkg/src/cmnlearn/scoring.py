"""Marginal pseudo-likelihood scoring: node-wise closed form, prior, and caches.

The score of a structure decomposes over nodes: each node contributes a
Dirichlet-multinomial marginal likelihood over the classes of its blanket
partition.  The context prior penalizes each context element by a factor
``kappa ** ((r_i - 1) * (r_j - 1))``; ``kappa_is_epsilon`` realizes the
limit that forbids contexts outright as a hard constraint.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .data import Dataset
from .kernels import class_counts_kernel
from .model import (BlanketPartition, ContextualStructure, _radix_weights,
                    build_blanket_partition)

TIE_EPS = 1e-9


@dataclass(frozen=True)
class ScoreConfig:
    """Hyperparameters of the structure score.

    ``alpha`` is the per-cell Dirichlet pseudo-count (1/2 gives Jeffreys'
    prior); ``kappa`` in (0, 1] is the context-prior strength.  With
    ``kappa_is_epsilon`` set, any nonempty context is forbidden and the
    ``kappa`` value is ignored.
    """

    alpha: float = 0.5
    kappa: float = 1.0
    kappa_is_epsilon: bool = False

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.kappa <= 1:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa}")

    @property
    def log_kappa(self) -> float:
        return math.log(self.kappa)


@dataclass(frozen=True, eq=False)
class ClassCounts:
    """Per-class value counts for one node: counts[l, i] and totals[l]."""

    node: int
    q: int
    counts: np.ndarray
    totals: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        totals = counts.sum(axis=1) if self.totals is None else \
            np.ascontiguousarray(self.totals, dtype=np.int64)
        object.__setattr__(self, "totals", totals)
        if counts.shape[0] != self.q:
            raise ValueError(f"counts have {counts.shape[0]} classes, expected {self.q}")
        if not np.array_equal(counts.sum(axis=1), totals):
            raise ValueError("class totals do not match the row sums of counts")


def class_counts(dataset: Dataset, partition: BlanketPartition) -> ClassCounts:
    """Single pass over rows: one increment per (blanket class, node value)."""
    j = partition.node
    blanket = np.asarray(partition.blanket, dtype=np.int64)
    weights = _radix_weights([dataset.cardinalities[i] for i in partition.blanket])
    counts = class_counts_kernel(dataset.values, j, blanket, weights,
                                 partition.classes, partition.q,
                                 dataset.cardinalities[j])
    return ClassCounts(j, partition.q, counts)


def local_log_mpl(counts: ClassCounts, config: ScoreConfig) -> float:
    """Closed-form log marginal likelihood of one node's class/count table.

    Sum over classes l of
    ``lnG(a_l) - lnG(n_l + a_l) + sum_i (lnG(n_il + alpha) - lnG(alpha))``
    with per-cell pseudo-count alpha and class total ``a_l = r_j * alpha``.
    Empty classes contribute exactly zero.
    """
    alpha = config.alpha
    table = counts.counts
    q, r = table.shape
    alpha_class = r * alpha
    cell_terms = gammaln(table + alpha).sum() - table.size * gammaln(alpha)
    class_terms = q * gammaln(alpha_class) - gammaln(counts.totals + alpha_class).sum()
    return float(cell_terms + class_terms)


class MplScorer:
    """Caches per-node scores for one dataset, keyed by (node, blanket, local contexts).

    The cache is guarded by a lock, so concurrent scoring of candidates is
    safe; all entries are pure functions of the key, hence concurrent calls
    always return identical values.
    """

    def __init__(self, dataset: Dataset, config: ScoreConfig,
                 cache_size: int = 1_000_000):
        self.dataset = dataset
        self.config = config
        self._cache: OrderedDict[tuple, float] = OrderedDict()
        self._cache_size = cache_size
        self._lock = threading.Lock()

    def node_key(self, structure: ContextualStructure, j: int) -> tuple:
        return (j, structure.graph.neighbors(j), structure.node_context_key(j))

    def node_score(self, structure: ContextualStructure, j: int) -> float:
        key = self.node_key(structure, j)
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                return self._cache[key]
        value = self.node_score_uncached(structure, j)
        with self._lock:
            self._cache[key] = value
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return value

    def node_score_uncached(self, structure: ContextualStructure, j: int) -> float:
        partition = build_blanket_partition(structure, self.dataset.cardinalities, j)
        return local_log_mpl(class_counts(self.dataset, partition), self.config)

    def log_mpl(self, structure: ContextualStructure) -> tuple[float, tuple[float, ...]]:
        breakdown = tuple(self.node_score(structure, j) for j in range(structure.d))
        return float(sum(breakdown)), breakdown

    def log_prior(self, structure: ContextualStructure) -> float:
        return log_context_prior(structure, self.dataset.cardinalities, self.config)

    def total_score(self, structure: ContextualStructure) -> float:
        total, _ = self.log_mpl(structure)
        return total + self.log_prior(structure)


def log_mpl(dataset: Dataset, structure: ContextualStructure,
            config: ScoreConfig) -> tuple[float, tuple[float, ...]]:
    """Log marginal pseudo-likelihood and its per-node breakdown."""
    return MplScorer(dataset, config).log_mpl(structure)


def log_context_prior(structure: ContextualStructure, cards: Sequence[int],
                      config: ScoreConfig) -> float:
    """Unnormalized log prior of the context given the graph.

    Each edge contributes ``|context| * (r_i - 1) * (r_j - 1) * ln(kappa)``.
    Under ``kappa_is_epsilon`` any nonempty context is forbidden (-inf);
    the graph prior is uniform and dropped as a constant.
    """
    items = structure.context_items()
    if config.kappa_is_epsilon:
        return float("-inf") if items else 0.0
    exponent = sum(len(els) * (cards[i] - 1) * (cards[j] - 1)
                   for (i, j), els in items)
    return exponent * config.log_kappa


def total_score(dataset: Dataset, structure: ContextualStructure,
                config: ScoreConfig) -> float:
    """The search objective: log MPL plus log context prior."""
    total, _ = log_mpl(dataset, structure, config)
    return total + log_context_prior(structure, dataset.cardinalities, config)


def sbic(log_lik: float, dimension: int, n: int) -> float:
    """Standardized BIC: ``(log_lik - dimension/2 * ln n) / n``."""
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n}")
    return (log_lik - 0.5 * dimension * math.log(n)) / n


@dataclass(frozen=True, eq=False)
class ScoredModel:
    """Selection record for one learned structure.

    ``log_lik``, ``bic`` and ``sbic`` are filled once maximum-likelihood
    parameters have been fitted; ``model`` then holds the fitted log-linear
    model.  ``kappa_label`` names the prior strength the structure was
    learned under (``"eps"`` forbids contexts).
    """

    structure: ContextualStructure
    log_mpl: float
    log_prior: float
    kappa_label: str = ""
    dimension: int | None = None
    log_lik: float | None = None
    bic: float | None = None
    sbic: float | None = None
    n: int | None = None
    model: object | None = None
    log_mpl_breakdown: tuple[float, ...] = ()

    def with_fit(self, model, log_lik: float, dimension: int, n: int) -> "ScoredModel":
        bic_value = log_lik - 0.5 * dimension * math.log(n)
        return ScoredModel(
            structure=self.structure, log_mpl=self.log_mpl, log_prior=self.log_prior,
            kappa_label=self.kappa_label, dimension=dimension, log_lik=log_lik,
            bic=bic_value, sbic=bic_value / n, n=n, model=model,
            log_mpl_breakdown=self.log_mpl_breakdown)

    @property
    def total_score(self) -> float:
        return self.log_mpl + self.log_prior
