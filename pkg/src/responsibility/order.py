"""Total orders on R^d, represented as lexicographic orders on a basis.

Every total order on R^d (d >= 2) is isomorphic to a lexicographic order on
some non-Archimedean basis, so an order is stored as an invertible basis and
two vectors are compared by the coordinates they have in that basis.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "Ordering",
    "OrderSpec",
    "as_vector",
    "canonical_order",
    "random_order",
    "lex_compare",
    "lex_compare_many",
]

# Above this dimension coordinates come from a stored LU factorisation.
LU_THRESHOLD = 4
# Coordinates within this many rounding units of zero are snapped to zero.
SNAP_ULPS = 16.0
DET_TOL = 1e-8


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def as_vector(x: Any, d: int | None = None) -> np.ndarray:
    """Validate ``x`` as a finite vector in R^d (d >= 2) and return a float copy."""
    v = np.array(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if v.shape[0] < 2:
        raise ValueError("vectors must have dimension d >= 2")
    if d is not None and v.shape[0] != d:
        raise ValueError(f"dimension mismatch: expected {d}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector components must be finite")
    return v


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OrderSpec:
    """A total order on R^d: lexicographic comparison of basis coordinates.

    ``basis`` holds the basis vectors v_1..v_d as columns. The order puts
    v_1 first: x << y iff the first coordinate (in this basis) where the two
    differ is smaller for x.
    """

    basis: np.ndarray
    inverse: np.ndarray = field(init=False, repr=False)
    _lu: tuple | None = field(init=False, repr=False, default=None)
    _snap: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        basis = _frozen(self.basis)
        if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
            raise ValueError(f"basis must be square, got shape {basis.shape}")
        d = basis.shape[0]
        if d < 2:
            raise ValueError("orders are defined for d >= 2 only")
        if not np.all(np.isfinite(basis)):
            raise ValueError("basis entries must be finite")
        scale = np.max(np.abs(basis))
        det = np.linalg.det(basis)
        if scale == 0 or abs(det) < DET_TOL * scale**d:
            raise ValueError(f"basis is singular (|det|={abs(det):.3g})")
        if d > LU_THRESHOLD:
            lu, piv = scipy.linalg.lu_factor(basis)
            object.__setattr__(self, "_lu", (lu, _pivot_permutation(piv, d)))
            inverse = scipy.linalg.lu_solve((lu, piv), np.eye(d))
        else:
            inverse = np.linalg.inv(basis)
        if np.max(np.abs(inverse @ basis - np.eye(d))) > 1e-9:
            raise ValueError("basis is too ill-conditioned to invert reliably")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "inverse", _frozen(inverse))
        object.__setattr__(self, "_snap", _frozen(np.abs(inverse) * (SNAP_ULPS * d * np.finfo(float).eps)))

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    def vector(self, i: int) -> np.ndarray:
        """Basis vector v_i, 1-based as in the usual notation."""
        if not 1 <= i <= self.d:
            raise IndexError(f"basis index must be in 1..{self.d}, got {i}")
        return self.basis[:, i - 1].copy()

    def coordinates(self, points: Any) -> np.ndarray:
        """Coordinates of each row of ``points`` in this basis.

        The result depends only on each row, never on the batch it came in,
        so comparisons made one pair at a time agree with batch sorting.
        Coordinates indistinguishable from zero at working precision are
        snapped to exactly zero.
        """
        x = np.asarray(points, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.d:
            raise ValueError(f"dimension mismatch: order has d={self.d}, points have {x.shape[1]}")
        if self._lu is None:
            c = np.zeros_like(x)
            for m in range(self.d):
                c += x[:, m, None] * self.inverse[None, :, m]
        else:
            c = _lu_substitute(self._lu, x)
        bound = np.zeros_like(x)
        ax = np.abs(x)
        for m in range(self.d):
            bound += ax[:, m, None] * self._snap[None, :, m]
        c[np.abs(c) <= bound] = 0.0
        return c[0] if single else c

    def sort_keys(self, points: Any) -> np.ndarray:
        """Row-wise sort keys: basis coordinates, then raw components.

        The raw components only matter if two distinct vectors round to the
        same coordinates; they keep the order total and antisymmetric.
        """
        x = np.atleast_2d(np.asarray(points, dtype=float))
        return np.concatenate([self.coordinates(x), x], axis=1)

    def argsort(self, points: Any) -> np.ndarray:
        """Indices that put the rows of ``points`` in increasing order."""
        keys = self.sort_keys(points)
        return np.lexsort(keys.T[::-1])

    def to_dict(self) -> dict[str, Any]:
        return {"d": self.d, "basis": self.basis.tolist()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "OrderSpec":
        spec = cls(np.array(data["basis"], dtype=float))
        if "d" in data and int(data["d"]) != spec.d:
            raise ValueError(f"declared d={data['d']} does not match basis size {spec.d}")
        return spec

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "OrderSpec":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OrderSpec):
            return NotImplemented
        return np.array_equal(self.basis, other.basis)

    def __hash__(self) -> int:
        return hash(self.basis.tobytes())


def _pivot_permutation(piv: np.ndarray, d: int) -> np.ndarray:
    perm = np.arange(d)
    for i, p in enumerate(piv):
        perm[i], perm[p] = perm[p], perm[i]
    return perm


def _lu_substitute(factor: tuple, x: np.ndarray) -> np.ndarray:
    # Row-wise forward/back substitution with elementwise ops only.
    lu, perm = factor
    d = lu.shape[0]
    y = x[:, perm].copy()
    for i in range(d):
        for k in range(i):
            y[:, i] -= lu[i, k] * y[:, k]
    for i in range(d - 1, -1, -1):
        for k in range(i + 1, d):
            y[:, i] -= lu[i, k] * y[:, k]
        y[:, i] /= lu[i, i]
    return y


def canonical_order(d: int) -> OrderSpec:
    """Standard lexicographic order on R^d (identity basis)."""
    if d < 2:
        raise ValueError("orders are defined for d >= 2 only")
    return OrderSpec(np.eye(d))


def random_order(d: int, seed: int) -> OrderSpec:
    """Deterministic random total order on R^d drawn from ``seed``."""
    if d < 2:
        raise ValueError("orders are defined for d >= 2 only")
    rng = np.random.default_rng(seed)
    while True:
        try:
            return OrderSpec(rng.standard_normal((d, d)))
        except ValueError:
            continue


def lex_compare(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray, order: OrderSpec) -> Ordering:
    """Compare ``x`` and ``y`` under ``order``."""
    x = as_vector(x, order.d)
    y = as_vector(y, order.d)
    if np.array_equal(x, y):
        return Ordering.EQUAL
    keys = order.sort_keys(np.stack([x, y]))
    diff = np.nonzero(keys[0] != keys[1])[0]
    if diff.size == 0:
        # Only possible for signed zeros, which compare equal as floats.
        return Ordering.EQUAL
    i = diff[0]
    return Ordering.LESS if keys[0, i] < keys[1, i] else Ordering.GREATER


def lex_compare_many(x: np.ndarray, y: np.ndarray, order: OrderSpec) -> np.ndarray:
    """Row-wise :func:`lex_compare` over two (m, d) arrays, as -1/0/+1 integers.

    Uses the same per-row keys, so results agree exactly with the scalar form.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.shape[1] != order.d:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape} for d={order.d}")
    kx, ky = order.sort_keys(x), order.sort_keys(y)
    neq = kx != ky
    first = np.argmax(neq, axis=1)
    rows = np.arange(len(kx))
    sign = np.where(kx[rows, first] < ky[rows, first], -1, 1)
    return np.where(neq.any(axis=1), sign, 0)
