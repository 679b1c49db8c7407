"""Log-linear parameterization of a contextual structure and exact MLE fitting.

The joint distribution is ``log p(x) = sum_A phi_A(x_A)`` where A ranges over
nonempty complete subsets of the graph and terms with any zero coordinate
vanish identically (so only coordinates with all values >= 1 are stored).
Each context element adds linear restrictions tying interaction terms of the
edge to zero; fitting is done over a basis of the restriction null space.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .data import DEFAULT_TABLE_CAP, Dataset, JointTable, empirical_joint
from .errors import CapacityError, FitError, StructureError
from .model import (ContextualStructure, UndirectedGraph, common_neighbors,
                    validate_structure)

Feature = tuple[tuple[int, ...], tuple[int, ...]]

MAX_FEATURES = 1 << 22


def complete_subsets(graph: UndirectedGraph) -> tuple[tuple[int, ...], ...]:
    """All nonempty subsets of nodes inducing complete subgraphs, ordered by (size, lex)."""
    found: list[tuple[int, ...]] = []
    frontier = [(i,) for i in range(graph.d)]
    while frontier:
        found.extend(frontier)
        nxt = []
        for subset in frontier:
            last = subset[-1]
            for v in range(last + 1, graph.d):
                if all(graph.has_edge(u, v) for u in subset):
                    nxt.append(subset + (v,))
        frontier = nxt
    return tuple(sorted(found, key=lambda s: (len(s), s)))


class FeatureIndex:
    """Enumeration of the stored phi coordinates (A, x_A with all coords >= 1)."""

    def __init__(self, graph: UndirectedGraph, cards: Sequence[int]):
        self.graph = graph
        self.cards = tuple(int(r) for r in cards)
        self.support = complete_subsets(graph)
        nominal = sum(math.prod(self.cards[j] - 1 for j in A) for A in self.support)
        if nominal > MAX_FEATURES:
            raise CapacityError(
                f"log-linear parameterization needs {nominal} coordinates, above the "
                f"{MAX_FEATURES} guard")
        self.features: list[Feature] = []
        for A in self.support:
            for x in itertools.product(*(range(1, self.cards[j]) for j in A)):
                self.features.append((A, x))
        self.index: dict[Feature, int] = {f: i for i, f in enumerate(self.features)}

    def __len__(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class ConstraintSystem:
    """Linear restrictions sum of phi coordinates = 0 induced by the contexts.

    ``rows[r]`` lists the feature ids entering equation r with coefficient +1;
    ``terms[r]`` mirrors them as (A, x_A) pairs.  ``rank`` is computed by
    exact elimination over the rationals.
    """

    rows: tuple[tuple[int, ...], ...]
    terms: tuple[tuple[Feature, ...], ...]
    rank: int

    @property
    def row_count(self) -> int:
        return len(self.rows)


def _rational_rref(rows: Sequence[Mapping[int, Fraction]], ncols: int):
    """Exact reduced row echelon form of a sparse 0/1 system.

    Returns (rank, pivot columns, reduced rows as {col: coefficient}).
    """
    reduced: list[dict[int, Fraction]] = []
    pivots: list[int] = []
    for row in rows:
        work = dict(row)
        for pcol, prow in zip(pivots, reduced):
            coef = work.get(pcol)
            if coef:
                for c, v in prow.items():
                    new = work.get(c, Fraction(0)) - coef * v
                    if new:
                        work[c] = new
                    else:
                        work.pop(c, None)
        work = {c: v for c, v in work.items() if v}
        if not work:
            continue
        pcol = min(work)
        inv = 1 / work[pcol]
        work = {c: v * inv for c, v in work.items()}
        for prow in reduced:
            coef = prow.get(pcol)
            if coef:
                for c, v in work.items():
                    new = prow.get(c, Fraction(0)) - coef * v
                    if new:
                        prow[c] = new
                    else:
                        prow.pop(c, None)
        reduced.append(work)
        pivots.append(pcol)
    order = np.argsort(pivots)
    return len(pivots), [pivots[i] for i in order], [reduced[i] for i in order]


def constraint_system(structure: ContextualStructure, cards: Sequence[int],
                      features: FeatureIndex | None = None) -> ConstraintSystem:
    """Equations from every context element: for each (x'_i, x'_j) with both
    coordinates >= 1, the phi terms over subsets of cn(i, j) (joined with the
    edge) sum to zero; terms with a zero coordinate or an incomplete subset
    are dropped.
    """
    graph = structure.graph
    if features is None:
        features = FeatureIndex(graph, cards)
    rows: list[tuple[int, ...]] = []
    terms: list[tuple[Feature, ...]] = []
    for (i, j), elements in structure.context_items():
        cn = common_neighbors(graph, i, j)
        subsets = [A for size in range(len(cn) + 1)
                   for A in itertools.combinations(cn, size)]
        for element in sorted(elements):
            coords = dict(zip(cn, element))
            for xi in range(1, cards[i]):
                for xj in range(1, cards[j]):
                    row_terms: list[Feature] = []
                    for A in subsets:
                        if any(coords[k] == 0 for k in A):
                            continue
                        full = tuple(sorted(A + (i, j)))
                        if not graph.is_complete_subset(full):
                            continue
                        assignment = {k: coords[k] for k in A}
                        assignment[i] = xi
                        assignment[j] = xj
                        x = tuple(assignment[k] for k in full)
                        row_terms.append((full, x))
                    rows.append(tuple(features.index[t] for t in row_terms))
                    terms.append(tuple(row_terms))
    sparse = [{c: Fraction(1) for c in row} for row in rows]
    rank, _, _ = _rational_rref(sparse, len(features))
    return ConstraintSystem(tuple(rows), tuple(terms), rank)


def null_space_basis(system: ConstraintSystem, n_features: int) -> np.ndarray:
    """Orthonormal basis (n_features x k) of the constraint null space.

    The null space is computed exactly from the rational RREF, then
    orthonormalized in floating point.
    """
    sparse = [{c: Fraction(1) for c in row} for row in system.rows]
    rank, pivots, reduced = _rational_rref(sparse, n_features)
    pivot_set = set(pivots)
    free = [c for c in range(n_features) if c not in pivot_set]
    if not free:
        return np.zeros((n_features, 0))
    basis = np.zeros((n_features, len(free)))
    for b, f in enumerate(free):
        basis[f, b] = 1.0
        for pcol, prow in zip(pivots, reduced):
            coef = prow.get(f)
            if coef:
                basis[pcol, b] = -float(coef)
    q, _ = np.linalg.qr(basis)
    return q


def model_dimension(structure: ContextualStructure, cards: Sequence[int]) -> int:
    """Free-parameter count: stored coordinates minus constraint rank."""
    features = FeatureIndex(structure.graph, cards)
    system = constraint_system(structure, cards, features)
    return len(features) - system.rank


@dataclass(frozen=True, eq=False)
class LogLinearModel:
    """Fitted (or hand-built) log-linear model over complete subgraphs.

    ``phi`` maps stored coordinates (A, x_A) to values; ``log_z`` is the log
    normalizer, so ``log p(x) = sum_A phi_A(x_A) - log_z``.
    """

    cardinalities: tuple[int, ...]
    support: tuple[tuple[int, ...], ...]
    phi: dict[Feature, float]
    log_z: float

    def log_prob_table(self) -> np.ndarray:
        """Dense table of log probabilities, shape = cardinalities."""
        table = np.zeros(self.cardinalities)
        for (A, x), value in self.phi.items():
            sl = tuple(x[A.index(j)] if j in A else slice(None)
                       for j in range(len(self.cardinalities)))
            table[sl] += value
        return table - logsumexp(table)

    def phi_records(self) -> list[dict]:
        records = []
        for (A, x) in sorted(self.phi):
            records.append({"A": list(A), "x": list(x), "value": self.phi[(A, x)]})
        return records


def build_model(structure: ContextualStructure, cards: Sequence[int],
                phi_values: Mapping[Feature, float] | np.ndarray,
                cap: int = DEFAULT_TABLE_CAP) -> LogLinearModel:
    """Assemble a model from explicit phi values (vector over the feature index
    or mapping), computing the normalizer by full-table summation.

    The values must satisfy the structure's context restrictions to 1e-8.
    """
    features = FeatureIndex(structure.graph, cards)
    if isinstance(phi_values, np.ndarray):
        phi = {f: float(v) for f, v in zip(features.features, phi_values)}
    else:
        unknown = set(phi_values) - set(features.features)
        if unknown:
            raise StructureError(f"phi coordinates {sorted(unknown)} are not stored "
                                 "for this structure")
        phi = {f: float(phi_values.get(f, 0.0)) for f in features.features}
    system = constraint_system(structure, cards, features)
    vec = np.array([phi[f] for f in features.features])
    for row, terms in zip(system.rows, system.terms):
        residual = float(sum(vec[i] for i in row))
        if abs(residual) > 1e-8:
            raise StructureError(
                f"phi values violate the context restriction {terms} "
                f"(residual {residual:.3e})")
    cells = math.prod(cards)
    if cells > cap:
        raise CapacityError(f"model table needs {cells} cells, exceeding the cap of {cap}")
    shaped = tuple(int(r) for r in cards)
    raw = np.zeros(shaped)
    for (A, x), value in phi.items():
        sl = tuple(x[A.index(j)] if j in A else slice(None) for j in range(len(shaped)))
        raw[sl] += value
    return LogLinearModel(shaped, features.support, phi, float(logsumexp(raw)))


def joint_of(model: LogLinearModel, cap: int = DEFAULT_TABLE_CAP) -> JointTable:
    """Exponentiate and normalize the summed phi table."""
    cells = math.prod(model.cardinalities)
    if cells > cap:
        raise CapacityError(f"joint table needs {cells} cells, exceeding the cap of {cap}")
    probs = np.exp(model.log_prob_table())
    probs /= probs.sum()
    return JointTable(model.cardinalities, probs, cap=cap)


class LogLinearProblem:
    """Maximum-likelihood fit of a structure's log-linear model to a target table.

    The objective is ``n * sum_x target(x) * log p_phi(x)`` maximized over the
    affine subspace where all context restrictions hold, parameterized by an
    orthonormal null-space basis.  Newton steps with backtracking converge to
    gradient norms near machine precision at desk scale.
    """

    def __init__(self, structure: ContextualStructure, cards: Sequence[int],
                 target: np.ndarray, n: int):
        self.cards = tuple(int(r) for r in cards)
        self.n = n
        self.cells = math.prod(self.cards)
        self.features = FeatureIndex(structure.graph, self.cards)
        self.system = constraint_system(structure, self.cards, self.features)
        self.basis = null_space_basis(self.system, len(self.features))
        self.target_flat = np.ascontiguousarray(target, dtype=np.float64).reshape(-1)
        strides = np.ones(len(self.cards), dtype=np.int64)
        for t in range(len(self.cards) - 2, -1, -1):
            strides[t] = strides[t + 1] * self.cards[t + 1]
        self._feature_cells: list[np.ndarray] = []
        comp_cache: dict[tuple[int, ...], np.ndarray] = {}
        for A, x in self.features.features:
            comp = tuple(j for j in range(len(self.cards)) if j not in A)
            if comp not in comp_cache:
                offsets = np.zeros(1, dtype=np.int64)
                for j in comp:
                    offsets = (offsets[:, None] +
                               np.arange(self.cards[j], dtype=np.int64) * strides[j]).reshape(-1)
                comp_cache[comp] = offsets
            base = int(sum(strides[j] * v for j, v in zip(A, x)))
            self._feature_cells.append(comp_cache[comp] + base)
        self.target_mu = self._expectations(self.target_flat)

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    def _log_table(self, phi: np.ndarray) -> np.ndarray:
        table = np.zeros(self.cells)
        for f, idx in enumerate(self._feature_cells):
            if phi[f]:
                table[idx] += phi[f]
        return table

    def _expectations(self, weights_flat: np.ndarray) -> np.ndarray:
        return np.array([weights_flat[idx].sum() for idx in self._feature_cells])

    def phi_of(self, theta: np.ndarray) -> np.ndarray:
        return self.basis @ theta

    def objective(self, theta: np.ndarray) -> float:
        phi = self.phi_of(theta)
        table = self._log_table(phi)
        return self.n * (float(self.target_mu @ phi) - float(logsumexp(table)))

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        _, grad = self._state(theta)
        return grad

    def _state(self, theta: np.ndarray):
        phi = self.phi_of(theta)
        table = self._log_table(phi)
        log_z = float(logsumexp(table))
        probs = np.exp(table - log_z)
        mu = self._expectations(probs)
        grad = self.n * (self.basis.T @ (self.target_mu - mu))
        return (phi, table, log_z, probs, mu), grad

    def fit(self, tolerance: float = 1e-8, max_iter: int = 200) -> np.ndarray:
        theta = np.zeros(self.k)
        if self.k == 0:
            return theta
        (phi, _, log_z, probs, mu), grad = self._state(theta)
        value = self.n * (float(self.target_mu @ phi) - log_z)
        gnorm = float(np.linalg.norm(grad))
        for _ in range(max_iter):
            if gnorm < tolerance:
                return theta
            # Covariance of the features under the current model, projected
            # onto the basis: H = n * B' Cov B, positive definite.
            cov_b = np.empty((len(self.features), self.k))
            for c in range(self.k):
                g = self._log_table(self.basis[:, c])
                cov_b[:, c] = self._expectations(probs * g) - mu * float(mu @ self.basis[:, c])
            hess = self.n * (self.basis.T @ cov_b)
            hess = 0.5 * (hess + hess.T)
            ridge = 1e-12 * (1.0 + np.trace(hess) / self.k)
            step = np.linalg.solve(hess + ridge * np.eye(self.k), grad)
            slope = float(grad @ step)
            t = 1.0
            accepted = False
            while t > 1e-12:
                trial = theta + t * step
                (phi, _, log_z, probs_t, mu_t), grad_t = self._state(trial)
                trial_value = self.n * (float(self.target_mu @ phi) - log_z)
                trial_gnorm = float(np.linalg.norm(grad_t))
                # Near the optimum the objective gain drops below float
                # resolution, so first-order progress also accepts the step.
                if (trial_value >= value + 1e-4 * t * slope
                        or trial_gnorm <= 0.9 * gnorm):
                    theta, value, gnorm = trial, trial_value, trial_gnorm
                    probs, mu, grad = probs_t, mu_t, grad_t
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                raise FitError("line search failed", gradient_norm=gnorm)
        if gnorm >= tolerance:
            raise FitError(f"no convergence in {max_iter} iterations",
                           gradient_norm=gnorm)
        return theta


def fit_mle(dataset: Dataset, structure: ContextualStructure,
            tolerance: float = 1e-8, max_iter: int = 200,
            smoothing: float = 1e-6,
            cap: int = DEFAULT_TABLE_CAP) -> tuple[LogLinearModel, float]:
    """Fit maximum-likelihood parameters; returns the model and the data log-likelihood.

    ``smoothing`` spreads that much total mass uniformly over the empirical
    table before fitting (the boundary MLE may not exist otherwise); pass 0
    to fit the raw table.  The reported log-likelihood is always that of the
    raw data under the fitted model.
    """
    report = validate_structure(structure, dataset.cardinalities)
    if not report.ok:
        raise StructureError("; ".join(report.violations))
    if structure.d != dataset.d:
        raise StructureError(
            f"structure has {structure.d} variables but the dataset has {dataset.d}")
    empirical = empirical_joint(dataset, cap=cap)
    target = empirical.flat()
    if smoothing:
        target = (target + smoothing / target.size) / (1.0 + smoothing)
    problem = LogLinearProblem(structure, dataset.cardinalities, target, dataset.n)
    theta = problem.fit(tolerance=tolerance, max_iter=max_iter)
    phi = problem.phi_of(theta)
    table = problem._log_table(phi)
    log_z = float(logsumexp(table))
    log_probs = table - log_z
    log_lik = float(dataset.n * (empirical.flat() @ log_probs))
    model = LogLinearModel(tuple(dataset.cardinalities), problem.features.support,
                           {f: float(v) for f, v in zip(problem.features.features, phi)},
                           log_z)
    return model, log_lik


def model_to_json_dict(model: LogLinearModel) -> dict:
    return {"phi": model.phi_records(), "logZ": model.log_z}


def model_from_json_dict(obj: dict, structure: ContextualStructure,
                         cards: Sequence[int]) -> LogLinearModel:
    features = FeatureIndex(structure.graph, cards)
    phi = {f: 0.0 for f in features.features}
    for record in obj["phi"]:
        key = (tuple(int(a) for a in record["A"]), tuple(int(v) for v in record["x"]))
        if key not in phi:
            raise StructureError(f"phi coordinate {key} is not stored for this structure")
        phi[key] = float(record["value"])
    return LogLinearModel(tuple(int(r) for r in cards), features.support, phi,
                          float(obj["logZ"]))
