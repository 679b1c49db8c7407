"""Categorical datasets, cross-validation folds, and exact joint tables.

All randomness is produced by NumPy's PCG64 generator seeded explicitly, so
folds and samples are bit-reproducible across platforms.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, DataParseError, FormatError

DEFAULT_TABLE_CAP = 1 << 22


@dataclass(frozen=True, eq=False)
class Dataset:
    """Complete categorical observations: an n x d matrix of 0-based codes.

    ``cardinalities[j]`` is the number of levels of column j (at least 2);
    every entry in column j must lie in ``{0, ..., cardinalities[j] - 1}``.
    ``category_levels`` optionally records the string-to-code mapping used
    when the source file carried categorical tokens.
    """

    values: np.ndarray
    cardinalities: tuple[int, ...]
    variable_names: tuple[str, ...]
    category_levels: tuple[tuple[str, ...] | None, ...] | None = field(default=None)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.int32)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "cardinalities", tuple(int(r) for r in self.cardinalities))
        object.__setattr__(self, "variable_names", tuple(self.variable_names))
        if values.ndim != 2:
            raise FormatError("dataset values must be a 2-D matrix")
        n, d = values.shape
        if n < 1 or d < 1:
            raise FormatError(f"dataset must have n >= 1 rows and d >= 1 columns, got {n} x {d}")
        if len(self.cardinalities) != d or len(self.variable_names) != d:
            raise FormatError("cardinalities and variable_names must match the column count")
        for j, r in enumerate(self.cardinalities):
            if r < 2:
                raise FormatError(
                    f"column {j + 1} has cardinality {r}; every variable needs at least 2 levels "
                    "(declare larger cardinalities in a schema sidecar if levels are unobserved)"
                )
        lo = values.min(axis=0)
        hi = values.max(axis=0)
        for j, r in enumerate(self.cardinalities):
            if lo[j] < 0 or hi[j] >= r:
                bad = int(hi[j] if hi[j] >= r else lo[j])
                raise DataParseError(
                    f"value {bad} outside the declared range 0..{r - 1}", column=j + 1
                )

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def subset(self, rows: Sequence[int] | np.ndarray) -> "Dataset":
        """Row subset preserving cardinalities and names (used by CV splits)."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.values[rows], self.cardinalities,
                       self.variable_names, self.category_levels)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dataset)
            and self.cardinalities == other.cardinalities
            and self.variable_names == other.variable_names
            and np.array_equal(self.values, other.values)
        )

    def to_csv(self, path: str | Path) -> None:
        """Write the integer codes as CSV with a header row of variable names."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.variable_names)
            writer.writerows(self.values.tolist())


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of n rows to K cross-validation folds; pure function of (n, K, seed)."""

    fold_assignment: tuple[int, ...]
    K: int
    seed: int

    def __post_init__(self):
        n = len(self.fold_assignment)
        if self.K < 2:
            raise ValueError(f"fold count must be at least 2, got {self.K}")
        sizes = np.bincount(np.asarray(self.fold_assignment), minlength=self.K)
        if len(sizes) != self.K or sizes.max() - sizes.min() > 1 or sizes.sum() != n:
            raise ValueError("fold assignment does not balance rows across folds")

    @property
    def n(self) -> int:
        return len(self.fold_assignment)

    def fold_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.fold_assignment) == k)

    def train_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.fold_assignment) != k)


@dataclass(frozen=True, eq=False)
class JointTable:
    """Dense joint distribution over d categorical variables, row-major order."""

    cardinalities: tuple[int, ...]
    probabilities: np.ndarray

    def __init__(self, cardinalities: Iterable[int], probabilities: np.ndarray,
                 cap: int = DEFAULT_TABLE_CAP):
        cards = tuple(int(r) for r in cardinalities)
        cells = math.prod(cards)
        if cells > cap:
            raise CapacityError(f"joint table needs {cells} cells, exceeding the cap of {cap}")
        probs = np.ascontiguousarray(probabilities, dtype=np.float64).reshape(cards)
        if probs.min() < 0:
            raise ValueError("joint table probabilities must be nonnegative")
        total = probs.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"joint table probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "cardinalities", cards)
        object.__setattr__(self, "probabilities", probs)

    @property
    def d(self) -> int:
        return len(self.cardinalities)

    @property
    def cells(self) -> int:
        return self.probabilities.size

    def flat(self) -> np.ndarray:
        return self.probabilities.reshape(-1)

    def to_json_dict(self) -> dict:
        return {
            "cardinalities": list(self.cardinalities),
            "probabilities": self.flat().tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict, cap: int = DEFAULT_TABLE_CAP) -> "JointTable":
        try:
            return cls(obj["cardinalities"], np.asarray(obj["probabilities"], dtype=np.float64),
                       cap=cap)
        except KeyError as exc:
            raise FormatError(f"joint table JSON is missing key {exc}") from exc


def _encode_column(tokens: list[str], col: int) -> tuple[list[int], tuple[str, ...] | None]:
    """Integer codes for one CSV column: numeric codes or first-appearance encoding."""
    if all(tok.isdigit() for tok in tokens):
        return [int(tok) for tok in tokens], None
    levels: dict[str, int] = {}
    codes = []
    for row, tok in enumerate(tokens):
        if tok == "":
            raise DataParseError("missing value", row=row + 1, column=col + 1)
        codes.append(levels.setdefault(tok, len(levels)))
    return codes, tuple(levels)


def load_csv(path: str | Path, has_header: bool = False,
             schema: str | Path | dict | None = None) -> Dataset:
    """Read a categorical CSV into a :class:`Dataset`.

    Columns of nonnegative integer literals are taken as codes directly; any
    other column is encoded by first appearance.  Cardinalities default to
    one plus the largest observed code unless a schema sidecar (JSON with
    optional ``variable_names`` and ``cardinalities``) overrides them.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    header: list[str] | None = None
    if has_header:
        header = [tok.strip() for tok in rows[0]]
        rows = rows[1:]
        if not rows:
            raise FormatError(f"{path}: header but no data rows")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise FormatError(f"{path}: ragged row {i + 1} has {len(row)} fields, expected {width}")
    if width == 0:
        raise FormatError(f"{path}: rows have no fields")

    columns = [[rows[i][j].strip() for i in range(len(rows))] for j in range(width)]
    codes_by_col = []
    levels_by_col: list[tuple[str, ...] | None] = []
    for j, tokens in enumerate(columns):
        codes, levels = _encode_column(tokens, j)
        codes_by_col.append(codes)
        levels_by_col.append(levels)
    values = np.array(codes_by_col, dtype=np.int32).T

    names = tuple(header) if header else tuple(f"x{j}" for j in range(width))
    cards = [int(values[:, j].max()) + 1 for j in range(width)]

    if schema is not None:
        if not isinstance(schema, dict):
            with open(schema, encoding="utf-8") as fh:
                schema = json.load(fh)
        declared_names = schema.get("variable_names")
        if declared_names is not None:
            if len(declared_names) != width:
                raise FormatError(
                    f"schema declares {len(declared_names)} variables, data has {width}")
            names = tuple(declared_names)
        declared_cards = schema.get("cardinalities")
        if declared_cards is not None:
            if len(declared_cards) != width:
                raise FormatError(
                    f"schema declares {len(declared_cards)} cardinalities, data has {width}")
            for j, r in enumerate(declared_cards):
                bad = np.flatnonzero(values[:, j] >= int(r))
                if bad.size:
                    raise DataParseError(
                        f"value {int(values[bad[0], j])} outside the declared range 0..{int(r) - 1}",
                        row=int(bad[0]) + 1, column=j + 1)
            cards = [int(r) for r in declared_cards]

    return Dataset(values, tuple(cards), names, tuple(levels_by_col))


def make_folds(n: int, K: int, seed: int) -> FoldPlan:
    """Deal a seeded pseudo-random permutation of rows round-robin into K folds."""
    if not 2 <= K <= n:
        raise ValueError(f"need 2 <= K <= n, got K={K}, n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[perm] = np.arange(n) % K
    return FoldPlan(tuple(int(a) for a in assignment), K, seed)


def sample_joint(table: JointTable, n: int, seed: int,
                 variable_names: Sequence[str] | None = None) -> Dataset:
    """Draw n i.i.d. rows by inverse-CDF over the flattened table (PCG64 seeded)."""
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n}")
    cum = np.cumsum(table.flat())
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    idx = np.minimum(np.searchsorted(cum, u, side="right"), table.cells - 1)
    values = np.stack(np.unravel_index(idx, table.cardinalities), axis=1)
    names = tuple(variable_names) if variable_names else tuple(
        f"x{j}" for j in range(table.d))
    return Dataset(values, table.cardinalities, names)


def empirical_joint(dataset: Dataset, cap: int = DEFAULT_TABLE_CAP) -> JointTable:
    """Cell frequencies count/n of the dataset as a dense joint table."""
    cells = math.prod(dataset.cardinalities)
    if cells > cap:
        raise CapacityError(f"empirical table needs {cells} cells, exceeding the cap of {cap}")
    flat = np.ravel_multi_index(dataset.values.T, dataset.cardinalities)
    counts = np.bincount(flat, minlength=cells)
    return JointTable(dataset.cardinalities, counts / dataset.n, cap=cap)
