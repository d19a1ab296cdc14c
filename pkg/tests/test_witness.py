import json
import math

import numpy as np
import pytest

from oracles import grid_crossings, lemma3_gap
from responsibility.metric import MetricSpec, MomentsEncoder, RandomFeaturesEncoder, d_theta, frobenius_diff
from responsibility.order import canonical_order, random_order
from responsibility.sets import PointSet, RegionSwapMap, SortMap, apply
from responsibility.witness import (
    NON_SORTING,
    SORTING,
    LinePath,
    NoResponsibilityChange,
    WitnessCertificate,
    WitnessError,
    WitnessVerificationError,
    nonsorting_witness,
    random_swap_path,
    sorting_witness,
    swap_bounds,
    verify_certificate,
    witness_sweep,
)

CANON = canonical_order(2)


class TestSortingWitness:
    def test_worked_example(self):
        cert = sorting_witness(CANON, [0, 0], epsilon_in=1.0, j=2, tau=0.01)
        assert cert.kind == SORTING
        assert apply(SortMap(CANON), cert.theta).rows.tolist() == [[0, 0], [0, 1]]
        assert apply(SortMap(CANON), cert.theta_prime).rows.tolist() == [[-0.01, 1], [0, 0]]
        assert cert.epsilon == 1.0
        assert cert.delta == pytest.approx(0.01, abs=1e-12)
        # [(0,0),(0,1)] - [(-0.01,1),(0,0)] -> sqrt(1.0001 + 1)
        assert cert.achieved_gap == pytest.approx(math.sqrt(2.0001), abs=1e-12)
        assert cert.params == {
            "j": 2,
            "tau": 0.01,
            "epsilon_in": 1.0,
            "v1_nudge": 0.0,
            "metric": MetricSpec.identity(2).to_dict(),
        }

    def test_gap_insensitive_to_tau(self):
        big = sorting_witness(CANON, [0, 0], epsilon_in=1.0, j=2, tau=0.01)
        small = sorting_witness(CANON, [0, 0], epsilon_in=1.0, j=2, tau=0.001)
        assert small.delta == pytest.approx(0.001, abs=1e-12)
        assert round(small.achieved_gap, 4) == round(big.achieved_gap, 4)

    def test_random_sweep_against_closed_form(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            a = rng.uniform(-1, 1, 2)
            eps = rng.uniform(0.1, 1.0)
            tau = 10 ** rng.uniform(-6, -2)
            cert = sorting_witness(CANON, a, epsilon_in=eps, j=2, tau=tau)
            b = a + eps * np.array([0.0, 1.0])
            c = b - tau * np.array([1.0, 0.0])
            assert cert.achieved_gap >= cert.epsilon - 1e-9
            assert cert.achieved_gap == pytest.approx(lemma3_gap(a, b, c), abs=1e-12)
            assert cert.delta == pytest.approx(tau, rel=1e-6)
            assert verify_certificate(cert, SortMap(CANON))

    @pytest.mark.parametrize("d, seed, j", [(3, 1, 2), (3, 1, 3), (5, 4, 5), (6, 2, 3)])
    def test_random_orders(self, d, seed, j):
        order = random_order(d, seed)
        a = np.random.default_rng(seed).uniform(-1, 1, d)
        cert = sorting_witness(order, a, n=4, epsilon_in=0.5, j=j, tau=1e-5)
        assert cert.achieved_gap >= cert.epsilon - 1e-9
        assert cert.epsilon == pytest.approx(0.5 * np.linalg.norm(order.vector(j)))
        assert verify_certificate(cert, SortMap(order))

    def test_rounding_below_anchor_is_nudged(self):
        # a + eps * v_j often rounds a few ulps below a along v_1 in a random basis.
        rng = np.random.default_rng(6)
        nudged = 0
        for seed in range(30):
            order = random_order(3, seed)
            for _ in range(10):
                a = rng.uniform(-1, 1, 3)
                cert = sorting_witness(order, a, n=3, j=2, tau=1e-5)
                nudge = cert.params["v1_nudge"]
                nudged += nudge > 0
                assert nudge < 1e-12
                assert verify_certificate(cert, SortMap(order))
        assert nudged > 0

    def test_gap_bound_with_fillers(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = rng.uniform(-1, 1, 2)
            cert = sorting_witness(CANON, a, n=5, epsilon_in=0.7, j=2, tau=1e-3)
            b, c = cert.theta.points[1], cert.theta_prime.points[1]
            assert cert.achieved_gap**2 >= np.sum((a - c) ** 2) + np.sum((b - a) ** 2) - 1e-9

    def test_theta_differs_in_one_element(self):
        cert = sorting_witness(CANON, [0.3, -0.2], n=4, tau=1e-4)
        diff = np.any(cert.theta.points != cert.theta_prime.points, axis=1)
        assert diff.sum() == 1

    def test_user_fillers(self):
        cert = sorting_witness(CANON, [0, 0], filler=[[-5, 0], [5, 3]], tau=1e-2)
        assert cert.theta.n == 4
        assert cert.achieved_gap == pytest.approx(math.sqrt(2.0001))

    def test_tau_too_large_for_filler_below(self):
        with pytest.raises(WitnessError, match="too large"):
            sorting_witness(CANON, [0, 0], filler=[[-0.5, 0]], tau=1.0)

    def test_filler_between_c_and_b(self):
        with pytest.raises(WitnessError, match="interferes"):
            sorting_witness(CANON, [0, 0], filler=[[0, 0.5]], tau=0.01)

    def test_j_must_exceed_one(self):
        with pytest.raises(WitnessError, match="j must exceed 1"):
            sorting_witness(CANON, [0, 0], j=1, tau=0.01)

    def test_j_out_of_range(self):
        with pytest.raises(WitnessError):
            sorting_witness(CANON, [0, 0], j=3, tau=0.01)

    def test_zero_epsilon_duplicates(self):
        with pytest.raises(WitnessError, match="duplicate"):
            sorting_witness(CANON, [0, 0], epsilon_in=0.0, tau=0.01)

    def test_tau_below_resolution(self):
        with pytest.raises(WitnessError, match="resolution"):
            sorting_witness(CANON, [1e6, 0], tau=1e-12)

    def test_non_sorting_map_fails_verification(self):
        # Under the swapped order the constructed pair is not a swap for canonical sorting.
        swapped = random_order(2, 0)
        with pytest.raises(WitnessVerificationError):
            sorting_witness(CANON, [0.0, 0.0], set_map=SortMap(swapped), tau=1e-3, epsilon_in=1.0)

    def test_default_tau_uses_lipschitz_estimate(self):
        cert = sorting_witness(CANON, [0, 0])
        assert cert.params["tau"] == pytest.approx(1e-4, rel=1e-9)
        spec = MetricSpec(RandomFeaturesEncoder(2, 16, 0))
        cert = sorting_witness(CANON, [0, 0], metric=spec, delta_target=1e-6)
        assert cert.params["tau"] < 1e-4
        assert cert.delta < 2e-6

    def test_blow_up_single_anchor(self):
        ratios = [sorting_witness(CANON, [0.2, 0.4], tau=t).ratio for t in (1e-2, 1e-3, 1e-4, 1e-5)]
        assert all(r2 >= 8 * r1 for r1, r2 in zip(ratios, ratios[1:]))

    def test_moments_metric(self):
        spec = MetricSpec(MomentsEncoder(2, 2))
        cert = sorting_witness(CANON, [0.5, 0.5], tau=1e-5, metric=spec)
        assert cert.delta == pytest.approx(d_theta(cert.theta, cert.theta_prime, spec), abs=1e-12)
        assert cert.delta < 1e-4


def _spec_example_path():
    # a = (-10, 0), b = (-9, 0) fixed, u(t) = (t, t); the coordinate sum
    # -19 + 2t crosses boundary -19 at t = 0.
    base = PointSet([[-10, 0], [-9, 0], [0, 0]])
    return LinePath(base, 2, np.zeros(2), np.ones(2))


class TestNonSortingWitness:
    boundary = -19.0

    def test_converges_to_crossing(self):
        m = RegionSwapMap(CANON, self.boundary)
        path = _spec_example_path()
        assert m.swapped(path(5.0)) and not m.swapped(path(-5.0))
        cert = nonsorting_witness(m, path, -5.0, 5.0, tol=1e-6)
        assert cert.kind == NON_SORTING
        assert cert.params["converged"]
        assert cert.delta < 1e-6
        assert cert.delta == d_theta(cert.theta, cert.theta_prime, MetricSpec.identity(2))
        t_star = 0.5 * (cert.params["t_lo"] + cert.params["t_hi"])
        crossings = grid_crossings(path.base.points, 2, path.origin, path.direction, -5.0, 5.0, 1e-6, self.boundary)
        assert len(crossings) == 1
        assert abs(t_star - crossings[0]) < 1e-5
        assert cert.achieved_gap == pytest.approx(math.sqrt(2.0), abs=1e-5)
        assert cert.epsilon == pytest.approx(math.sqrt(2.0))
        assert cert.achieved_gap >= cert.epsilon - 1e-9
        assert np.array_equal(cert.anchor, [-10, 0])
        assert verify_certificate(cert, m)

    def test_tolerance_scaling(self):
        m = RegionSwapMap(CANON, self.boundary)
        coarse = nonsorting_witness(m, _spec_example_path(), -5.0, 5.0, tol=1e-3)
        fine = nonsorting_witness(m, _spec_example_path(), -5.0, 5.0, tol=1e-6)
        assert abs(coarse.epsilon - fine.epsilon) < 1e-6
        assert 500 < coarse.delta / fine.delta < 2000

    def test_no_change_on_path(self):
        m = RegionSwapMap(CANON, np.inf)
        with pytest.raises(NoResponsibilityChange, match="no responsibility change"):
            nonsorting_witness(m, _spec_example_path(), -5.0, 5.0)

    def test_path_leaving_set_space(self):
        # The moving element hits (0, 0) at the first midpoint.
        base = PointSet([[0, 0], [3, 0], [1, 1]])
        path = LinePath.between(base, 2, [-1, -1])
        with pytest.raises(WitnessError, match="leaves"):
            nonsorting_witness(SortMap(CANON), path, 0.0, 1.0)

    def test_iteration_cap_flags_non_convergence(self):
        m = RegionSwapMap(CANON, self.boundary)
        cert = nonsorting_witness(m, _spec_example_path(), -5.0, 5.0, tol=1e-9, max_iter=5)
        assert not cert.params["converged"] and cert.params["iterations"] == 5

    def test_random_paths(self):
        rng = np.random.default_rng(3)
        for set_map in (RegionSwapMap(CANON, 0.0), RegionSwapMap(random_order(2, 1), 0.5), SortMap(CANON)):
            for _ in range(20):
                path = random_swap_path(set_map, 4, 2, rng)
                cert = nonsorting_witness(set_map, path, 0.0, 1.0, tol=1e-6)
                assert cert.delta < 1e-6
                assert cert.achieved_gap >= cert.epsilon - 1e-9
                assert verify_certificate(cert, set_map)

    def test_filler_only_bound_overstates_direct_exchange(self):
        m = RegionSwapMap(CANON, self.boundary)
        cert = nonsorting_witness(m, _spec_example_path(), -5.0, 5.0, tol=1e-6)
        bound, filler_only = swap_bounds(cert.theta, cert.theta_prime, *cert.params["pair"])
        assert bound == pytest.approx(2.0)
        # min(100 + 100, 81 + 81) at the crossing, far above the actual gap^2 = 2.
        assert filler_only == pytest.approx(162.0, abs=1e-4)
        assert cert.achieved_gap**2 < filler_only

    def test_swap_bounds_without_fillers(self):
        theta, theta_prime = PointSet([[0, 0], [1, 0]]), PointSet([[0, 0], [1, 1e-9]])
        bound, filler_only = swap_bounds(theta, theta_prime, 0, 1)
        assert math.isinf(filler_only)
        assert bound == pytest.approx(2.0)


class TestSweep:
    def test_distinct_loci(self):
        result = witness_sweep(CANON, 1000, seed=0, tau=1e-4)
        assert len(result.certificates) == 1000
        assert result.distinct_loci == 1000

    def test_single_anchor_matches_direct_call(self):
        result = witness_sweep(CANON, 1, seed=5, tau=1e-3)
        anchor = np.random.default_rng(5).uniform(-1, 1, 2)
        direct = sorting_witness(CANON, anchor, tau=1e-3)
        assert result.certificates[0].to_json() == direct.to_json()

    def test_ratio_scales_with_tau(self):
        coarse = witness_sweep(CANON, 50, seed=1, tau=1e-3)
        fine = witness_sweep(CANON, 50, seed=1, tau=1e-4)
        assert fine.median_ratio / coarse.median_ratio == pytest.approx(10.0, rel=1e-3)
        # Identity encoder: ratio >= epsilon_in / (tau * L) with L = 1.
        assert coarse.min_ratio >= 1.0 / 1e-3

    def test_count_must_be_positive(self):
        with pytest.raises(ValueError):
            witness_sweep(CANON, 0, seed=0)


class TestCertificate:
    def test_json_round_trip_is_bit_exact(self):
        cert = sorting_witness(random_order(3, 2), [1 / 3, -2 / 7, 0.1], n=3, tau=1e-5)
        again = WitnessCertificate.from_json(cert.to_json())
        assert again.to_json() == cert.to_json()
        assert again.delta == cert.delta and again.achieved_gap == cert.achieved_gap
        assert np.array_equal(again.theta_prime.points, cert.theta_prime.points)

    def test_json_keys(self):
        data = json.loads(sorting_witness(CANON, [0, 0], tau=1e-3).to_json())
        assert set(data) == {"kind", "theta", "theta_prime", "delta", "epsilon", "achieved_gap", "anchor", "params"}

    def test_self_verifying(self):
        rng = np.random.default_rng(4)
        m = RegionSwapMap(CANON, 0.0)
        certs = [sorting_witness(CANON, rng.uniform(-1, 1, 2), n=3, tau=1e-4) for _ in range(20)]
        certs += [nonsorting_witness(m, random_swap_path(m, 3, 2, rng), 0.0, 1.0) for _ in range(20)]
        for cert in certs:
            cert = WitnessCertificate.from_json(cert.to_json())
            set_map = SortMap(CANON) if cert.kind == SORTING else m
            gap = frobenius_diff(apply(set_map, cert.theta), apply(set_map, cert.theta_prime))
            assert abs(gap - cert.achieved_gap) <= 1e-9
            assert abs(d_theta(cert.theta, cert.theta_prime, cert.metric()) - cert.delta) <= 1e-9

    def test_tampered_certificate_fails(self):
        cert = sorting_witness(CANON, [0, 0], tau=1e-3)
        data = cert.to_dict()
        data["achieved_gap"] = 2.0
        assert not verify_certificate(WitnessCertificate.from_dict(data), SortMap(CANON))
