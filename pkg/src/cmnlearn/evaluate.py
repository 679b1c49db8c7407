"""Model-quality metrics: KL divergence, K-fold predictive accuracy, reports."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import DEFAULT_TABLE_CAP, Dataset, FoldPlan, JointTable
from .params import LogLinearModel
from .scoring import ScoredModel


def kl_divergence(p: JointTable, q: JointTable) -> float:
    """Natural-log KL divergence sum p log(p/q); infinite when q misses p's support."""
    if p.cardinalities != q.cardinalities:
        raise ValueError(
            f"table shapes differ: {len(p.cardinalities)} variables {p.cardinalities} "
            f"vs {len(q.cardinalities)} variables {q.cardinalities}")
    pf = p.flat()
    qf = q.flat()
    mask = pf > 0
    if np.any(qf[mask] == 0):
        return math.inf
    return float(np.sum(pf[mask] * (np.log(pf[mask]) - np.log(qf[mask]))))


def _test_log_probability(model: LogLinearModel, rows: np.ndarray) -> float:
    """Mean log probability per test row under the fitted model."""
    log_probs = model.log_prob_table().reshape(-1)
    idx = np.ravel_multi_index(rows.T, model.cardinalities)
    return float(log_probs[idx].sum() / rows.shape[0])


@dataclass(frozen=True)
class FoldScores:
    """Per-fold standardized test log-probabilities and their mean."""

    per_fold: tuple[float, ...]

    @property
    def mean(self) -> float:
        return sum(self.per_fold) / len(self.per_fold)


@dataclass(frozen=True)
class CrossValidationResult:
    """Held-out accuracy of the BIC-selected model and the context-free MN."""

    cmn: FoldScores
    mn: FoldScores
    K: int
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "folds": self.K,
            "seed": self.seed,
            "cmn": {"per_fold": list(self.cmn.per_fold), "mean": self.cmn.mean},
            "mn": {"per_fold": list(self.mn.per_fold), "mean": self.mn.mean},
        }


def cross_validated_accuracy(dataset: Dataset, folds: FoldPlan,
                             kappa_grid: Sequence[str | float] | None = None,
                             alpha: float = 0.5, fit_tolerance: float = 1e-8,
                             fit_max_iter: int = 200, smoothing: float = 1e-6,
                             cap: int = DEFAULT_TABLE_CAP,
                             threads: int = 1) -> CrossValidationResult:
    """Learn on each training complement and average test-row log probabilities.

    Each fold runs the full prior sweep on the training rows, fits MLEs, and
    scores the held-out rows under both the selected model and the MN; the
    per-fold value divides by the fold size, so folds are comparable and the
    mean is on a per-observation scale.  Unseen test levels are covered by the
    smoothing floor in the fit.
    """
    from .search import kappa_sweep  # local import to avoid a cycle

    if folds.n != dataset.n:
        raise ValueError(f"fold plan covers {folds.n} rows, dataset has {dataset.n}")

    def run_fold(k: int) -> tuple[float, float]:
        train = dataset.subset(folds.train_indices(k))
        test_rows = dataset.values[folds.fold_indices(k)]
        sweep = kappa_sweep(train, kappa_grid=kappa_grid, alpha=alpha,
                            fit_tolerance=fit_tolerance, fit_max_iter=fit_max_iter,
                            smoothing=smoothing, cap=cap)
        return (_test_log_probability(sweep.selected.model, test_rows),
                _test_log_probability(sweep.mn.model, test_rows))

    ks = range(folds.K)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_fold, ks))
    else:
        results = [run_fold(k) for k in ks]
    return CrossValidationResult(
        cmn=FoldScores(tuple(r[0] for r in results)),
        mn=FoldScores(tuple(r[1] for r in results)),
        K=folds.K, seed=folds.seed)


@dataclass(frozen=True)
class ReportRow:
    label: str
    sbic: float | None
    edges: int
    dimension: int | None
    context_elements: int
    kl: float | None
    selected: bool


@dataclass(frozen=True)
class ExperimentReport:
    """Comparison table over scored models, optionally against a known truth."""

    rows: tuple[ReportRow, ...]

    def to_json_dict(self) -> dict:
        rows = []
        for row in self.rows:
            entry = {
                "label": row.label,
                "sbic": row.sbic,
                "edges": row.edges,
                "parameters": row.dimension,
                "context_elements": row.context_elements,
                "selected": row.selected,
            }
            if row.kl is not None:
                entry["kl"] = row.kl
            rows.append(entry)
        return {"models": rows}

    def to_text(self) -> str:
        has_kl = any(row.kl is not None for row in self.rows)
        headers = ["model", "sBIC", "edges", "params", "ctx"]
        if has_kl:
            headers.append("KL")
        headers.append("")
        lines = []
        body = []
        for row in self.rows:
            cells = [row.label,
                     "" if row.sbic is None else f"{row.sbic:.6f}",
                     str(row.edges),
                     "" if row.dimension is None else str(row.dimension),
                     str(row.context_elements)]
            if has_kl:
                cells.append("" if row.kl is None else f"{row.kl:.6f}")
            cells.append("*" if row.selected else "")
            body.append(cells)
        widths = [max(len(h), *(len(r[c]) for r in body))
                  for c, h in enumerate(headers)]
        lines.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip())
        for cells in body:
            lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip())
        return "\n".join(lines)


def experiment_report(models: Sequence[ScoredModel],
                      truth: JointTable | None = None,
                      cap: int = DEFAULT_TABLE_CAP) -> ExperimentReport:
    """Per-model summary: sBIC, structure statistics, and KL when truth is known.

    The BIC winner among models with fitted likelihoods is marked selected.
    """
    from .params import joint_of  # local import to avoid a cycle

    best = None
    for m in models:
        if m.bic is not None and (best is None or m.bic > best.bic):
            best = m
    rows = []
    for m in models:
        kl = None
        if truth is not None and m.model is not None:
            kl = kl_divergence(truth, joint_of(m.model, cap=cap))
        rows.append(ReportRow(
            label=m.kappa_label or "model",
            sbic=m.sbic,
            edges=len(m.structure.graph.edges),
            dimension=m.dimension,
            context_elements=m.structure.total_context_elements(),
            kl=kl,
            selected=m is best))
    return ExperimentReport(tuple(rows))
