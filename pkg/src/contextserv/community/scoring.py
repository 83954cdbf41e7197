"""Min-max attribute scaling, weighted utility and ranking of providers."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import NoEligibleProvider, ShapeMismatch, WeightError

WEIGHT_TOLERANCE = 1e-9
# utilities this close are the same score up to rounding, so they tie
TIE_TOLERANCE = 1e-12


class Polarity(enum.Enum):
    POSITIVE = "positive"  # larger is better
    NEGATIVE = "negative"  # smaller is better


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    polarity: Polarity
    weight: float


@dataclass(frozen=True)
class ValueMatrix:
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    cells: np.ndarray

    @property
    def i_max(self) -> np.ndarray:
        return self.cells.max(axis=0)

    @property
    def i_min(self) -> np.ndarray:
        return self.cells.min(axis=0)

    @property
    def i_diff(self) -> np.ndarray:
        return self.i_max - self.i_min

    @classmethod
    def from_rows(cls, rows, columns, values) -> "ValueMatrix":
        cells = np.asarray(values, dtype=float).reshape(len(rows), len(columns))
        return cls(tuple(rows), tuple(columns), cells)


@dataclass(frozen=True)
class ScoreMatrix:
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    cells: np.ndarray


def build_score_matrix(values: ValueMatrix, specs) -> ScoreMatrix:
    cells = np.asarray(values.cells, dtype=float)
    specs = list(specs)
    if cells.ndim != 2 or cells.shape[0] == 0:
        raise ShapeMismatch("value matrix must be a non-empty 2-D array")
    if cells.shape != (len(values.rows), len(values.columns)):
        raise ShapeMismatch(f"matrix shape {cells.shape} does not match its labels")
    if tuple(s.name for s in specs) != tuple(values.columns):
        raise ShapeMismatch("attribute specs do not match the matrix columns")
    scores = np.empty_like(cells)
    for j, spec in enumerate(specs):
        col = cells[:, j]
        hi, lo = col.max(), col.min()
        diff = hi - lo
        if diff == 0:
            scores[:, j] = 1.0
        elif spec.polarity is Polarity.NEGATIVE:
            scores[:, j] = (hi - col) / diff
        else:
            scores[:, j] = (col - lo) / diff
    return ScoreMatrix(values.rows, values.columns, scores)


def check_weights(weights) -> np.ndarray:
    w = np.asarray(list(weights), dtype=float)
    if (w < 0).any() or (w > 1).any():
        raise WeightError(f"weights must lie in [0, 1]: {w.tolist()}")
    if abs(float(w.sum()) - 1.0) > WEIGHT_TOLERANCE:
        raise WeightError(f"weights sum to {float(w.sum())!r}, not 1")
    return w


def utility(scores: ScoreMatrix, weights) -> list[tuple[str, float]]:
    """Weighted sum of scores per provider, in row order."""
    w = check_weights(weights)
    if w.shape[0] != scores.cells.shape[1]:
        raise ShapeMismatch(f"{w.shape[0]} weights for {scores.cells.shape[1]} attributes")
    # accumulate column by column so the summation order is fixed
    u = np.zeros(scores.cells.shape[0])
    for j in range(w.shape[0]):
        u += w[j] * scores.cells[:, j]
    np.clip(u, 0.0, 1.0, out=u)
    return list(zip(scores.rows, u.tolist()))


def rank(utilities: list[tuple[str, float]], tol: float = TIE_TOLERANCE) -> list[tuple[str, float]]:
    """Descending by utility; ties (within ``tol``) keep their input (registration) order."""
    order = sorted(range(len(utilities)), key=lambda i: -utilities[i][1])
    out: list[int] = []
    group: list[int] = []
    for i in order:
        if group and utilities[group[0]][1] - utilities[i][1] > tol:
            out.extend(sorted(group))
            group = []
        group.append(i)
    out.extend(sorted(group))
    return [utilities[i] for i in out]


@dataclass(frozen=True)
class SelectionResult:
    ranked: list[tuple[str, float]]
    chosen: str


def select_from_matrix(values: ValueMatrix, specs, available=None) -> SelectionResult:
    """Score, rank and pick the best currently available provider.

    ``available`` maps provider id to its latest known state (missing ids
    count as available).
    """
    specs = list(specs)
    ranked = rank(utility(build_score_matrix(values, specs), [s.weight for s in specs]))
    available = available or {}
    for pid, _ in ranked:
        if available.get(pid, True):
            return SelectionResult(ranked, pid)
    raise NoEligibleProvider("every eligible provider is currently unavailable")
