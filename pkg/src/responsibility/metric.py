"""Sum-pooling set distance and Frobenius distance between output matrices.

The set distance is ``|| sum_x phi(x) - sum_x' phi(x') ||_p`` for a continuous
element encoder ``phi``. It is a true metric only when the pooled encoding is
injective on sets; with the identity encoder it is merely a pseudometric.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence, Union

import numpy as np

from .sets import OutputMatrix, PointSet

__all__ = [
    "Encoder",
    "IdentityEncoder",
    "MomentsEncoder",
    "RandomFeaturesEncoder",
    "encoder_from_dict",
    "MetricSpec",
    "d_theta",
    "d_theta_many",
    "frobenius_diff",
    "local_lipschitz",
]


class Encoder:
    """Continuous element encoder R^d -> R^k, applied row-wise."""

    kind = "encoder"
    d: int

    @property
    def output_dim(self) -> int:
        raise NotImplementedError

    def encode(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, points: Any) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        if x.shape[1] != self.d:
            raise ValueError(f"dimension mismatch: encoder expects d={self.d}, got {x.shape[1]}")
        return self.encode(x)

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class IdentityEncoder(Encoder):
    d: int
    kind = "identity"

    @property
    def output_dim(self) -> int:
        return self.d

    def encode(self, points: np.ndarray) -> np.ndarray:
        return points.copy()

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "d": self.d}


@dataclass(frozen=True)
class MomentsEncoder(Encoder):
    """All monomials x^alpha with 1 <= |alpha| <= degree, graded then lexicographic."""

    d: int
    degree: int
    exponents: tuple = field(init=False, repr=False, compare=False)
    kind = "moments"

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise ValueError("moment degree must be >= 1")
        exps = []
        for deg in range(1, self.degree + 1):
            for combo in itertools.combinations_with_replacement(range(self.d), deg):
                alpha = [0] * self.d
                for i in combo:
                    alpha[i] += 1
                exps.append(tuple(alpha))
        object.__setattr__(self, "exponents", tuple(exps))

    @property
    def output_dim(self) -> int:
        return len(self.exponents)

    def encode(self, points: np.ndarray) -> np.ndarray:
        out = np.empty((points.shape[0], self.output_dim))
        for col, alpha in enumerate(self.exponents):
            out[:, col] = np.prod(points ** np.array(alpha, dtype=float), axis=1)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "d": self.d, "degree": self.degree}


@dataclass(frozen=True)
class RandomFeaturesEncoder(Encoder):
    """``tanh(W x + b)`` with W, b drawn from ``seed``."""

    d: int
    k: int
    seed: int = 0
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    bias: np.ndarray = field(init=False, repr=False, compare=False)
    kind = "random_features"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        rng = np.random.default_rng(self.seed)
        w = rng.standard_normal((self.k, self.d))
        b = rng.uniform(-1.0, 1.0, self.k)
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def output_dim(self) -> int:
        return self.k

    def encode(self, points: np.ndarray) -> np.ndarray:
        pre = np.tile(self.bias, (points.shape[0], 1))
        for m in range(self.d):
            pre += points[:, m, None] * self.weights[None, :, m]
        return np.tanh(pre)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "d": self.d, "k": self.k, "seed": self.seed}


def encoder_from_dict(data: dict[str, Any]) -> Encoder:
    kind = data["kind"]
    d = int(data["d"])
    if kind == "identity":
        return IdentityEncoder(d)
    if kind == "moments":
        return MomentsEncoder(d, int(data["degree"]))
    if kind == "random_features":
        return RandomFeaturesEncoder(d, int(data["k"]), int(data.get("seed", 0)))
    raise ValueError(f"unknown encoder kind {kind!r}")


def _parse_p(p: Union[float, str]) -> float:
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity"):
            return math.inf
        p = float(p)
    p = float(p)
    if p not in (1.0, 2.0, math.inf):
        raise ValueError(f"p must be 1, 2 or inf, got {p}")
    return p


def _pnorm(rows: np.ndarray, p: float) -> np.ndarray:
    # Row-wise p-norm with a fixed accumulation order, so single and batched
    # evaluations agree bit for bit.
    a = np.abs(rows)
    if math.isinf(p):
        return np.max(a, axis=1)
    acc = np.zeros(a.shape[0])
    for col in (a if p == 1.0 else a * a).T:
        acc += col
    return acc if p == 1.0 else np.sqrt(acc)


@dataclass(frozen=True)
class MetricSpec:
    encoder: Encoder
    p: float = 2.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", _parse_p(self.p))

    @classmethod
    def identity(cls, d: int, p: float = 2.0) -> "MetricSpec":
        return cls(IdentityEncoder(d), p)

    @classmethod
    def default(cls, d: int, n: int) -> "MetricSpec":
        """Moments up to degree n, which separates sets that identity pooling confuses."""
        return cls(MomentsEncoder(d, n), 2.0)

    def to_dict(self) -> dict[str, Any]:
        return {"encoder": self.encoder.to_dict(), "p": "inf" if math.isinf(self.p) else self.p}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MetricSpec":
        return cls(encoder_from_dict(data["encoder"]), data.get("p", 2.0))

    def pooled(self, theta: PointSet) -> np.ndarray:
        # Summing in canonical order, row by row, makes the result exactly
        # storage-order invariant.
        enc = self.encoder(theta.canonical)
        out = enc[0].copy()
        for row in enc[1:]:
            out += row
        return out

    def pooled_many(self, thetas: Sequence[PointSet]) -> np.ndarray:
        """Pooled encodings of equal-size sets, bit-identical to :meth:`pooled`."""
        stack = np.stack([t.canonical for t in thetas])
        m, n, d = stack.shape
        enc = self.encoder(stack.reshape(m * n, d)).reshape(m, n, -1)
        out = enc[:, 0, :].copy()
        for i in range(1, n):
            out += enc[:, i, :]
        return out

    def __call__(self, theta: PointSet, theta_prime: PointSet) -> float:
        return d_theta(theta, theta_prime, self)


def d_theta(theta: PointSet, theta_prime: PointSet, spec: MetricSpec) -> float:
    """Sum-pooling distance between two sets."""
    if theta.d != theta_prime.d:
        raise ValueError(f"dimension mismatch: {theta.d} vs {theta_prime.d}")
    diff = spec.pooled(theta) - spec.pooled(theta_prime)
    return float(_pnorm(diff[None, :], spec.p)[0])


def d_theta_many(thetas: Sequence[PointSet], thetas_prime: Sequence[PointSet], spec: MetricSpec) -> np.ndarray:
    """Element-wise :func:`d_theta` over two equal-length lists of equal-size sets."""
    diff = spec.pooled_many(thetas) - spec.pooled_many(thetas_prime)
    return _pnorm(diff, spec.p)


def frobenius_diff(m: Union[OutputMatrix, np.ndarray], m_prime: Union[OutputMatrix, np.ndarray]) -> float:
    a = m.rows if isinstance(m, OutputMatrix) else np.asarray(m, dtype=float)
    b = m_prime.rows if isinstance(m_prime, OutputMatrix) else np.asarray(m_prime, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def local_lipschitz(
    encoder: Encoder,
    x: Any,
    radius: float = 1e-3,
    samples: int = 64,
    seed: int = 0,
    p: float = 2.0,
) -> float:
    """Sampled local Lipschitz estimate of ``encoder`` around ``x``.

    Max of ``|phi(x + h u) - phi(x)|_p / h`` over random unit directions u and
    step sizes h in (0, radius]. This is a lower estimate of the true
    constant; callers that need a safety margin should scale it.
    """
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((samples, x.shape[0]))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    h = radius * rng.uniform(0.1, 1.0, samples)
    base = encoder(x[None, :])[0]
    moved = encoder(x[None, :] + h[:, None] * u)
    slopes = np.linalg.norm(moved - base, ord=_parse_p(p), axis=1) / h
    return float(np.max(slopes))
