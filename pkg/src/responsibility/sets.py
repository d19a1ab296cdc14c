"""Finite point sets, set-to-matrix maps and sorting classification."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Union

import numpy as np

from .order import OrderSpec, Ordering, lex_compare

__all__ = [
    "PointSet",
    "Permutation",
    "OutputMatrix",
    "SetMap",
    "SortMap",
    "RegionSwapMap",
    "apply",
    "row_multiset",
    "region_swap_map",
    "random_point_set",
    "is_sorted_under",
    "SortingUnder",
    "NotSorting",
    "classify",
]


def _canonical_rows(points: np.ndarray) -> np.ndarray:
    # Raw lexicographic row order; used wherever storage order must not matter.
    return points[np.lexsort(points.T[::-1])]


class PointSet:
    """A set of n >= 2 distinct points in R^d.

    Storage order is kept (paths and permutations refer to it) but carries no
    meaning for equality or hashing.
    """

    __slots__ = ("_points", "_canonical")

    def __init__(self, points: Any):
        pts = np.array(points, dtype=float)
        if pts.ndim != 2:
            raise ValueError(f"points must be an (n, d) array, got shape {pts.shape}")
        n, d = pts.shape
        if n < 2:
            raise ValueError("a point set needs at least two elements")
        if d < 2:
            raise ValueError("points must have dimension d >= 2")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        canon = _canonical_rows(pts)
        if np.any(np.all(canon[1:] == canon[:-1], axis=1)):
            raise ValueError("duplicate points: a set cannot contain the same element twice")
        pts.setflags(write=False)
        canon.setflags(write=False)
        self._points = pts
        self._canonical = canon

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def canonical(self) -> np.ndarray:
        """Points in a fixed storage-independent order."""
        return self._canonical

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def d(self) -> int:
        return self._points.shape[1]

    def replace(self, index: int, point: Any) -> "PointSet":
        pts = self._points.copy()
        pts[index] = point
        return PointSet(pts)

    def __len__(self) -> int:
        return self.n

    def __iter__(self):
        return iter(self._points)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return self._canonical.shape == other._canonical.shape and np.array_equal(
            self._canonical, other._canonical
        )

    def __hash__(self) -> int:
        # +0.0 normalises negative zeros so equal sets hash equal.
        return hash((self._canonical.shape, (self._canonical + 0.0).tobytes()))

    def __repr__(self) -> str:
        return f"PointSet({self._points.tolist()!r})"

    def to_dict(self) -> dict[str, Any]:
        return {"points": self._points.tolist()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PointSet":
        return cls(data["points"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PointSet":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class Permutation:
    """``mapping[r]`` is the storage index of the element placed in row r."""

    mapping: tuple[int, ...]

    def __post_init__(self) -> None:
        mapping = tuple(int(i) for i in self.mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise ValueError(f"not a bijection on 0..{len(mapping) - 1}: {mapping}")
        object.__setattr__(self, "mapping", mapping)

    def __len__(self) -> int:
        return len(self.mapping)

    def rows(self) -> tuple[int, ...]:
        """Inverse view: the row each storage index ends up in."""
        inv = [0] * len(self.mapping)
        for r, i in enumerate(self.mapping):
            inv[i] = r
        return tuple(inv)


class OutputMatrix:
    """An n x d matrix produced by a set-to-matrix map."""

    __slots__ = ("_rows",)

    def __init__(self, rows: Any):
        m = np.array(rows, dtype=float)
        if m.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {m.shape}")
        m.setflags(write=False)
        self._rows = m

    @property
    def rows(self) -> np.ndarray:
        return self._rows

    @property
    def shape(self) -> tuple[int, int]:
        return self._rows.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OutputMatrix):
            return NotImplemented
        return self._rows.shape == other._rows.shape and np.array_equal(self._rows, other._rows)

    def __hash__(self) -> int:
        return hash((self._rows.shape, (self._rows + 0.0).tobytes()))

    def __repr__(self) -> str:
        return f"OutputMatrix({self._rows.tolist()!r})"

    def to_dict(self) -> dict[str, Any]:
        return {"matrix": self._rows.tolist()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "OutputMatrix":
        return cls(data["matrix"])


class SetMap:
    """A member of F: sends each set to a matrix listing its elements once.

    Subclasses implement :meth:`permutation`; :meth:`__call__` builds the
    matrix from it.
    """

    name = "set-map"

    def permutation(self, theta: PointSet) -> Permutation:
        raise NotImplementedError

    def __call__(self, theta: PointSet) -> OutputMatrix:
        perm = self.permutation(theta)
        return OutputMatrix(theta.points[list(perm.mapping)])


class SortMap(SetMap):
    """Sort the elements increasingly under an order."""

    name = "sort"

    def __init__(self, order: OrderSpec):
        self.order = order

    def permutation(self, theta: PointSet) -> Permutation:
        _check_dim(theta, self.order)
        return Permutation(tuple(self.order.argsort(theta.points)))

    def __repr__(self) -> str:
        return f"SortMap(d={self.order.d})"


class RegionSwapMap(SetMap):
    """Sort, then swap the first two rows when the total coordinate sum exceeds ``boundary``.

    The swap side violates the sorting chain, so this map is in F but is not
    a sorting operation under its order. The switching surface is a
    hyperplane in set space.
    """

    name = "region-swap"

    def __init__(self, order: OrderSpec, boundary: float = 0.0):
        self.order = order
        self.boundary = float(boundary)

    def swapped(self, theta: PointSet) -> bool:
        return float(np.sum(theta.canonical)) > self.boundary

    def permutation(self, theta: PointSet) -> Permutation:
        _check_dim(theta, self.order)
        idx = list(self.order.argsort(theta.points))
        if self.swapped(theta):
            idx[0], idx[1] = idx[1], idx[0]
        return Permutation(tuple(idx))

    def __repr__(self) -> str:
        return f"RegionSwapMap(d={self.order.d}, boundary={self.boundary!r})"


def _check_dim(theta: PointSet, order: OrderSpec) -> None:
    if theta.d != order.d:
        raise ValueError(f"dimension mismatch: set has d={theta.d}, map expects d={order.d}")


def apply(set_map: SetMap, theta: PointSet) -> OutputMatrix:
    return set_map(theta)


def row_multiset(matrix: Union[OutputMatrix, np.ndarray]) -> PointSet:
    """The set of rows of ``matrix``; duplicate rows cannot come from a set."""
    rows = matrix.rows if isinstance(matrix, OutputMatrix) else np.asarray(matrix, dtype=float)
    return PointSet(rows)


def region_swap_map(order: OrderSpec, boundary: float) -> RegionSwapMap:
    return RegionSwapMap(order, boundary)


def random_point_set(
    n: int, d: int, rng: np.random.Generator, low: float = -1.0, high: float = 1.0
) -> PointSet:
    """i.i.d. uniform points on [low, high]^d; resamples on the rare collision."""
    while True:
        pts = rng.uniform(low, high, size=(n, d))
        try:
            return PointSet(pts)
        except ValueError:
            continue


def is_sorted_under(rows: np.ndarray, order: OrderSpec) -> bool:
    """True if consecutive rows are non-decreasing under ``order``."""
    return all(lex_compare(rows[i], rows[i + 1], order) != Ordering.GREATER for i in range(len(rows) - 1))


@dataclass(frozen=True)
class SortingUnder:
    """No sampled set contradicted sorting under ``order`` (not a proof)."""

    order: OrderSpec
    samples: int

    is_sorting = True

    def to_dict(self) -> dict[str, Any]:
        return {"verdict": "sorting", "samples": self.samples, "order": self.order.to_dict()}


@dataclass(frozen=True)
class NotSorting:
    counterexample: PointSet
    samples_checked: int

    is_sorting = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": "not-sorting",
            "samples": self.samples_checked,
            "counterexample": self.counterexample.to_dict(),
        }


def classify(
    set_map: SetMap,
    order: OrderSpec,
    samples: int,
    seed: int,
    n: int = 3,
    low: float = -1.0,
    high: float = 1.0,
    sets: Iterable[PointSet] | None = None,
) -> Union[SortingUnder, NotSorting]:
    """Falsification test: does ``set_map`` sort every sampled set under ``order``?"""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if sets is None:
        rng = np.random.default_rng(seed)
        sets = (random_point_set(n, order.d, rng, low, high) for _ in range(samples))
    checked = 0
    for theta in sets:
        checked += 1
        rows = set_map(theta).rows
        if not is_sorted_under(rows, order):
            return NotSorting(theta, checked)
        if checked >= samples:
            break
    return SortingUnder(order, checked)
