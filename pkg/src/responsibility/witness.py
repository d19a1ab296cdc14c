"""Constructive discontinuity witnesses for set-to-matrix maps.

A witness is a pair of sets that are close under the set distance while
their images differ by at least a fixed amount in Frobenius norm. Two
constructions are provided:

* :func:`sorting_witness` for maps that sort under an order: nudge an
  element just past its neighbour along the dominant basis direction so the
  two trade rows.
* :func:`nonsorting_witness` for maps that do not sort: bisect along a
  path of sets until the two ends of a responsibility change are closer
  than a tolerance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .metric import MetricSpec, d_theta, frobenius_diff, local_lipschitz
from .order import OrderSpec, Ordering, as_vector, lex_compare
from .sets import Permutation, PointSet, SetMap, SortMap

__all__ = [
    "SORTING",
    "NON_SORTING",
    "WitnessError",
    "NoResponsibilityChange",
    "WitnessVerificationError",
    "WitnessCertificate",
    "sorting_witness",
    "LinePath",
    "random_swap_path",
    "swap_bounds",
    "nonsorting_witness",
    "SweepResult",
    "witness_sweep",
    "verify_certificate",
]

SORTING = "SortingWitness"
NON_SORTING = "NonSortingWitness"
GAP_TOL = 1e-9


class WitnessError(ValueError):
    """The requested construction is impossible with the given inputs."""


class NoResponsibilityChange(WitnessError):
    pass


class WitnessVerificationError(RuntimeError):
    """A constructed pair failed its own gap check."""


@dataclass(frozen=True)
class WitnessCertificate:
    kind: str
    theta: PointSet
    theta_prime: PointSet
    delta: float
    epsilon: float
    achieved_gap: float
    anchor: np.ndarray
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        """Modulus ratio gap/delta; unbounded growth as delta shrinks is the discontinuity."""
        return self.achieved_gap / self.delta if self.delta > 0 else math.inf

    def metric(self) -> MetricSpec:
        return MetricSpec.from_dict(self.params["metric"])

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "theta": self.theta.to_dict(),
            "theta_prime": self.theta_prime.to_dict(),
            "delta": self.delta,
            "epsilon": self.epsilon,
            "achieved_gap": self.achieved_gap,
            "anchor": [float(v) for v in self.anchor],
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "WitnessCertificate":
        return cls(
            kind=data["kind"],
            theta=PointSet.from_dict(data["theta"]),
            theta_prime=PointSet.from_dict(data["theta_prime"]),
            delta=float(data["delta"]),
            epsilon=float(data["epsilon"]),
            achieved_gap=float(data["achieved_gap"]),
            anchor=np.array(data["anchor"], dtype=float),
            params=dict(data.get("params", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "WitnessCertificate":
        return cls.from_dict(json.loads(text))


def _default_tau(metric: MetricSpec, order: OrderSpec, b: np.ndarray, delta_target: float) -> float:
    lip = local_lipschitz(metric.encoder, b, p=metric.p)
    scale = lip * float(np.linalg.norm(order.vector(1)))
    if scale <= 0:
        return 1e-4
    return min(1e-4, delta_target / scale)


def _partner(order: OrderSpec, a: np.ndarray, step: np.ndarray) -> tuple[np.ndarray, float]:
    """Return b = a + step + eta * v_1 with eta >= 0 the smallest nudge making a << b.

    In exact arithmetic a + step shares a's leading coordinate and eta = 0.
    After rounding it may land a few ulps below a along v_1; doubling eta
    from the rounding scale restores the intended order.
    """
    b = a + step
    if lex_compare(a, b, order) == Ordering.LESS:
        return b, 0.0
    v1 = order.vector(1)
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1.0) / float(np.linalg.norm(v1))
    eta = np.finfo(float).eps * scale
    for _ in range(40):
        nudged = b + eta * v1
        if lex_compare(a, nudged, order) == Ordering.LESS:
            return nudged, float(eta)
        eta *= 2.0
    raise WitnessError("a << b failed; epsilon_in is below floating-point resolution at this anchor")


def sorting_witness(
    order: OrderSpec,
    anchor: Sequence[float],
    filler: Sequence[Sequence[float]] | None = None,
    epsilon_in: float = 1.0,
    j: int = 2,
    tau: float | None = None,
    *,
    n: int | None = None,
    metric: MetricSpec | None = None,
    set_map: SetMap | None = None,
    delta_target: float = 1e-4,
) -> WitnessCertificate:
    """Witness for a map that sorts under ``order``.

    With a the anchor, ``b = a + epsilon_in * v_j`` sits just above a, while
    ``c = b - tau * v_1`` stays within ``tau |v_1|`` of b but drops below a.
    Swapping b for c leaves the set almost unchanged yet exchanges the rows
    holding a and its partner, so the output jumps by at least ``|b - a|``.
    If rounding puts b below a, b is nudged up along v_1 by a few ulps
    (recorded as ``params["v1_nudge"]``).

    ``filler`` supplies the other n - 2 elements. Each must lie strictly
    above b or strictly below c under the order so that only a and its
    partner trade places. When omitted, ``n - 2`` fillers are placed above
    b at offsets of at least ``10 * epsilon_in`` along v_1.

    ``set_map`` defaults to sorting under ``order``; ``metric`` defaults to
    the identity encoder with p = 2. ``j`` is 1-based.
    """
    a = as_vector(anchor, order.d)
    d = order.d
    if j == 1:
        raise WitnessError("j must exceed 1: the construction perturbs along a non-leading basis vector")
    if not 1 < j <= d:
        raise WitnessError(f"j must be in 2..{d}, got {j}")
    if not epsilon_in > 0:
        raise WitnessError("epsilon_in must be > 0; with epsilon_in = 0 b duplicates a")
    metric = metric or MetricSpec.identity(d)
    set_map = set_map or SortMap(order)
    v1 = order.vector(1)
    b, nudge = _partner(order, a, epsilon_in * order.vector(j))
    if tau is None:
        tau = _default_tau(metric, order, b, delta_target)
    if not tau > 0:
        raise WitnessError("tau must be > 0")
    c = b - tau * v1

    if lex_compare(c, a, order) != Ordering.LESS:
        raise WitnessError("c << a failed; tau is below floating-point resolution at this anchor")

    if filler is None:
        count = 0 if n is None else n - 2
        if count < 0:
            raise WitnessError("n must be >= 2")
        fillers = [b + 10.0 * epsilon_in * (k + 1) * v1 for k in range(count)]
    else:
        fillers = [as_vector(u, d) for u in filler]
        if n is not None and len(fillers) != n - 2:
            raise WitnessError(f"expected {n - 2} fillers for n={n}, got {len(fillers)}")
    for k, u in enumerate(fillers):
        above = lex_compare(b, u, order) == Ordering.LESS
        below = lex_compare(u, c, order) == Ordering.LESS
        if above or below:
            continue
        if lex_compare(u, a, order) == Ordering.LESS:
            raise WitnessError(
                f"tau={tau:g} is too large: c falls below filler {k}, so the swap is no longer "
                "between adjacent rows"
            )
        raise WitnessError(
            f"filler {k} lies between c and b in the order and interferes with the swap"
        )

    try:
        theta = PointSet([a, b, *fillers])
        theta_prime = PointSet([a, c, *fillers])
    except ValueError as exc:
        raise WitnessError(f"constructed points are not distinct: {exc}") from exc

    gap = frobenius_diff(set_map(theta), set_map(theta_prime))
    epsilon = float(np.linalg.norm(b - a))
    if gap < epsilon - GAP_TOL:
        raise WitnessVerificationError(
            f"output gap {gap!r} is below the guaranteed bound {epsilon!r}; the map does not sort under this order"
        )
    return WitnessCertificate(
        kind=SORTING,
        theta=theta,
        theta_prime=theta_prime,
        delta=d_theta(theta, theta_prime, metric),
        epsilon=epsilon,
        achieved_gap=gap,
        anchor=a,
        params={
            "j": j,
            "tau": float(tau),
            "epsilon_in": float(epsilon_in),
            "v1_nudge": nudge,
            "metric": metric.to_dict(),
        },
    )


@dataclass(frozen=True)
class LinePath:
    """Sets obtained by moving element ``index`` of ``base`` along a line.

    ``path(t)`` replaces that element by ``origin + t * direction``.
    """

    base: PointSet
    index: int
    origin: np.ndarray
    direction: np.ndarray

    @classmethod
    def between(cls, base: PointSet, index: int, end: Sequence[float]) -> "LinePath":
        """Path from ``base`` (t = 0) to ``base`` with the element moved to ``end`` (t = 1)."""
        start = base.points[index]
        return cls(base, index, start.copy(), np.asarray(end, dtype=float) - start)

    def point(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction

    def __call__(self, t: float) -> PointSet:
        return self.base.replace(self.index, self.point(t))

    def to_dict(self) -> dict[str, Any]:
        return {
            "base": self.base.to_dict(),
            "index": self.index,
            "origin": self.origin.tolist(),
            "direction": self.direction.tolist(),
        }


def random_swap_path(
    set_map: SetMap,
    n: int,
    d: int,
    rng: np.random.Generator,
    attempts: int = 1000,
    low: float = -1.0,
    high: float = 1.0,
) -> LinePath:
    """Random straight-line path on [0, 1] whose end sets get different row assignments."""
    for _ in range(attempts):
        pts = rng.uniform(low, high, size=(n, d))
        try:
            base = PointSet(pts)
        except ValueError:
            continue
        index = int(rng.integers(n))
        path = LinePath.between(base, index, rng.uniform(low, high, size=d))
        try:
            if set_map.permutation(path(0.0)) != set_map.permutation(path(1.0)):
                return path
        except ValueError:
            continue
    raise NoResponsibilityChange(f"no path with a responsibility change found in {attempts} attempts")


def _min_sq_dist(x: np.ndarray, others: np.ndarray) -> float:
    if len(others) == 0:
        return math.inf
    return float(np.min(np.sum((others - x) ** 2, axis=1)))


def swap_bounds(
    theta: PointSet, theta_prime: PointSet, a_index: int, b_index: int
) -> tuple[float, float]:
    """Squared output-gap lower bounds for a pair that trades relative rows.

    Elements are matched by storage index. Returns ``(bound, filler_only)``:

    ``bound`` lets the displaced row be refilled by any other element,
    including the partner, and is a valid lower bound in every case.

    ``filler_only`` restricts the refill to the n - 2 other elements and
    treats the pair as fixed, per the min-min expression. It overstates the
    gap when the two elements simply exchange rows with each other, and is
    ``inf`` when there are no other elements.
    """
    x, y = theta.points, theta_prime.points
    mask_pair = np.ones(theta.n, dtype=bool)
    mask_pair[[a_index, b_index]] = False

    def term(e: int) -> float:
        keep = np.arange(theta.n) != e
        return _min_sq_dist(x[e], y[keep]) + _min_sq_dist(y[e], x[keep])

    def filler_term(e: int) -> float:
        return _min_sq_dist(x[e], x[mask_pair]) + _min_sq_dist(x[e], y[mask_pair])

    bound = min(term(a_index), term(b_index))
    filler_only = min(filler_term(a_index), filler_term(b_index))
    return bound, filler_only


def _inverted_pairs(p: Permutation, q: Permutation) -> list[tuple[int, int]]:
    # (k, l) with k above l under p and below l under q.
    rp, rq = p.rows(), q.rows()
    n = len(rp)
    out = []
    for k in range(n):
        for l in range(n):
            if k != l and rp[k] < rp[l] and rq[k] > rq[l]:
                out.append((k, l))
    return out


def nonsorting_witness(
    set_map: SetMap,
    path: Callable[[float], PointSet],
    t_lo: float,
    t_hi: float,
    tol: float = 1e-6,
    *,
    metric: MetricSpec | None = None,
    max_iter: int = 200,
) -> WitnessCertificate:
    """Witness from a responsibility change along ``path``.

    The row assignment must differ between ``path(t_lo)`` and
    ``path(t_hi)``. The interval is bisected, keeping the two ends on
    opposite sides of a change, until the end sets are closer than ``tol``
    under the set distance or ``max_iter`` halvings are spent (reported in
    ``params["converged"]``).
    """

    def at(t: float) -> PointSet:
        try:
            return path(t)
        except ValueError as exc:
            raise WitnessError(f"path leaves the space of sets at t={t!r}: {exc}") from exc

    theta_lo, theta_hi = at(t_lo), at(t_hi)
    metric = metric or MetricSpec.identity(theta_lo.d)
    p_lo, p_hi = set_map.permutation(theta_lo), set_map.permutation(theta_hi)
    if p_lo == p_hi:
        raise NoResponsibilityChange("no responsibility change on path: end sets get the same row assignment")

    lo, hi = float(t_lo), float(t_hi)
    dist = d_theta(theta_lo, theta_hi, metric)
    iterations = 0
    while dist >= tol and iterations < max_iter:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        theta_mid = at(mid)
        p_mid = set_map.permutation(theta_mid)
        if p_mid == p_lo:
            lo, theta_lo = mid, theta_mid
        else:
            hi, theta_hi, p_hi = mid, theta_mid, p_mid
        dist = d_theta(theta_lo, theta_hi, metric)
        iterations += 1

    best = None
    for k, l in _inverted_pairs(p_lo, p_hi):
        bound, filler_only = swap_bounds(theta_lo, theta_hi, k, l)
        if best is None or bound > best[0]:
            best = (bound, filler_only, k, l)
    bound, filler_only, k, l = best

    gap = frobenius_diff(set_map(theta_lo), set_map(theta_hi))
    epsilon = math.sqrt(bound)
    if gap < epsilon - GAP_TOL:
        raise WitnessVerificationError(f"output gap {gap!r} is below the guaranteed bound {epsilon!r}")
    return WitnessCertificate(
        kind=NON_SORTING,
        theta=theta_lo,
        theta_prime=theta_hi,
        delta=dist,
        epsilon=epsilon,
        achieved_gap=gap,
        anchor=theta_lo.points[k].copy(),
        params={
            "t_lo": lo,
            "t_hi": hi,
            "tol": float(tol),
            "iterations": iterations,
            "converged": bool(dist < tol),
            "pair": [int(k), int(l)],
            "filler_bound": None if math.isinf(filler_only) else math.sqrt(filler_only),
            "metric": metric.to_dict(),
        },
    )


@dataclass(frozen=True)
class SweepResult:
    certificates: list[WitnessCertificate]
    distinct_loci: int
    min_ratio: float
    median_ratio: float

    def summary(self) -> dict[str, Any]:
        return {
            "count": len(self.certificates),
            "distinct_loci": self.distinct_loci,
            "min_ratio": self.min_ratio,
            "median_ratio": self.median_ratio,
        }


def witness_sweep(
    order: OrderSpec,
    count: int,
    seed: int,
    tau: float | None = None,
    *,
    epsilon_in: float = 1.0,
    j: int = 2,
    n: int = 2,
    metric: MetricSpec | None = None,
    set_map: SetMap | None = None,
) -> SweepResult:
    """Sorting witnesses at ``count`` distinct random anchors on [-1, 1]^d.

    Each anchor gives a different discontinuity locus, so the number of
    distinct witness sets grows with the number of anchors.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    metric = metric or MetricSpec.identity(order.d)
    set_map = set_map or SortMap(order)
    seen: set[bytes] = set()
    certs = []
    while len(certs) < count:
        a = rng.uniform(-1.0, 1.0, order.d)
        if a.tobytes() in seen:
            continue
        seen.add(a.tobytes())
        certs.append(
            sorting_witness(order, a, epsilon_in=epsilon_in, j=j, tau=tau, n=n, metric=metric, set_map=set_map)
        )
    ratios = np.array([c.ratio for c in certs])
    loci = len({c.theta for c in certs})
    return SweepResult(certs, loci, float(np.min(ratios)), float(np.median(ratios)))


def verify_certificate(
    cert: WitnessCertificate,
    set_map: SetMap,
    metric: MetricSpec | None = None,
    tol: float = 1e-9,
) -> bool:
    """Recompute a certificate from scratch against ``set_map``."""
    metric = metric or cert.metric()
    gap = frobenius_diff(set_map(cert.theta), set_map(cert.theta_prime))
    delta = d_theta(cert.theta, cert.theta_prime, metric)
    return (
        abs(gap - cert.achieved_gap) <= tol
        and abs(delta - cert.delta) <= tol
        and cert.achieved_gap >= cert.epsilon - GAP_TOL
    )
