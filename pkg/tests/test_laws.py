import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loopsoup import greens, laws
from loopsoup.records import VERDICT_FAILS, VERDICT_NOT_MET


class TestPointLaw:
    def test_u_zero(self):
        assert laws.prob_point_uncovered(0.3, 0.0) == 1.0

    def test_matches_exponential_of_mu(self):
        mu = greens.mu_gamma_o(0.3).value
        for u in (0.5, 1.0, 3.7):
            assert laws.prob_point_uncovered(0.3, u) \
                == pytest.approx(math.exp(-u * mu), rel=1e-13)

    def test_u_star_normalization(self):
        us = laws.u_star(0.3, 50)
        assert 50 * laws.prob_point_uncovered(0.3, us) == pytest.approx(1.0)

    def test_rejects_negative_u(self):
        with pytest.raises(ValueError):
            laws.prob_point_uncovered(0.3, -1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.0, 5.0), st.floats(0.0, 5.0))
    def test_semigroup(self, u, v):
        p = laws.prob_point_uncovered(0.5, u) * laws.prob_point_uncovered(0.5, v)
        assert p == pytest.approx(laws.prob_point_uncovered(0.5, u + v), rel=1e-10)


class TestPairLaws:
    def test_u_zero(self):
        assert laws.prob_pair_uncovered(0.5, (2, 1), 0.0) == 1.0
        assert laws.prob_no_shared_loop(0.5, (2, 1), 0.0) == 1.0

    def test_rejects_origin(self):
        with pytest.raises(ValueError):
            laws.prob_pair_uncovered(0.5, (0, 0), 1.0)
        with pytest.raises(ValueError):
            laws.prob_no_shared_loop(0.5, (0, 0), 1.0)

    def test_identity_chain(self):
        for kappa in (1.0, 0.25, 0.05):
            for x in ((1, 0), (1, 1), (3, 0), (5, 2)):
                for u in (0.5, 1.0, 2.0):
                    pair = laws.prob_pair_uncovered(kappa, x, u)
                    pt = laws.prob_point_uncovered(kappa, u)
                    nosh = laws.prob_no_shared_loop(kappa, x, u)
                    assert pair == pytest.approx(pt * pt / nosh, rel=1e-12)

    def test_sandwich(self):
        for u in (0.5, 1.0, 2.0):
            pt = laws.prob_point_uncovered(0.25, u)
            pair = laws.prob_pair_uncovered(0.25, (1, 1), u)
            assert pt * pt <= pair <= pt

    def test_monotone_in_distance(self):
        u = 1.5
        vals = [laws.prob_pair_uncovered(0.25, (r, 0), u) for r in (1, 2, 4, 8)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_far_pair_decorrelates(self):
        # at |x| = 4/kappa the shared-loop correction is below 1%
        for kappa in (1.0, 0.5, 0.25, 0.1):
            r = int(4 / kappa)
            pt = laws.prob_point_uncovered(kappa, 1.0)
            pair = laws.prob_pair_uncovered(kappa, (r, 0), 1.0)
            assert pair / (pt * pt) - 1.0 < 0.01


class TestUStarAndExpectations:
    def test_rejects_singleton(self):
        with pytest.raises(ValueError):
            laws.u_star(0.5, 1)

    def test_doubles_under_squaring(self):
        assert laws.u_star(0.5, 100 ** 2) \
            == pytest.approx(2 * laws.u_star(0.5, 100))

    def test_expected_uncovered_identity(self):
        assert laws.expected_uncovered(0.5, 10_000, 0.5) == pytest.approx(100.0)

    def test_expected_uncovered_epsilon_limit(self):
        assert laws.expected_uncovered(0.5, 10_000, 1e-9) == pytest.approx(1.0)

    def test_epsilon_validation(self):
        with pytest.raises(ValueError):
            laws.expected_uncovered(0.5, 100, 1.5)

    def test_epsilon_policy(self):
        mu = 0.5
        assert laws.parse_epsilon("auto100").resolve(mu) == pytest.approx(0.02)
        assert laws.parse_epsilon("auto400").resolve(mu) == pytest.approx(0.005)
        assert laws.parse_epsilon("0.25").resolve(mu) == 0.25


class TestPairBound:
    def test_medium_regime_selection(self):
        _, regime, hyp = laws.pair_bound(0.1, (5, 0), 0.1, 64)
        assert regime == "medium"
        assert hyp is False  # kappa^-1 = 10 << e^30

    def test_large_regime_selection(self):
        _, regime, _ = laws.pair_bound(0.5, (30, 0), 0.1, 64)
        assert regime == "large"

    def test_all_regime_for_close_points(self):
        _, regime, _ = laws.pair_bound(0.5, (1, 0), 0.1, 64)
        assert regime == "all"

    def test_returns_both_sides_when_hypotheses_unmet(self):
        bound, _, hyp = laws.pair_bound(0.1, (5, 0), 0.1, 64)
        assert bound > 0 and hyp is False

    def test_rejects_origin(self):
        with pytest.raises(ValueError):
            laws.pair_bound(0.1, (0, 0), 0.1, 64)


class TestQuasiIndependence:
    def test_singleton_formula(self):
        mu = greens.mu_gamma_o(0.5).value
        k = laws.TargetSet(((0, 0),))
        bound, ok = laws.quasi_independence_bound(0.5, k, 2.0, 100)
        assert bound == pytest.approx(2 * 2.0 * 100 ** (-1 / mu))
        assert ok  # no pairs to violate separation

    def test_close_pair_fails_separation(self):
        k = laws.TargetSet(((0, 0), (1, 0)))
        _, ok = laws.quasi_independence_bound(0.5, k, 1.0, 10_000)
        assert not ok

    def test_rejects_small_u(self):
        with pytest.raises(ValueError):
            laws.quasi_independence_bound(0.5, laws.TargetSet(((0, 0),)), 0.5, 10)


class TestHClass:
    def test_close_pair_not_in_class(self):
        k = laws.TargetSet(((0, 0), (1, 0)))
        assert not laws.in_h_class(0.5, 10_000, k, 0.05)


class TestSecondMoment:
    def test_partition_complete(self):
        a = laws.box_set(8)
        rep = laws.second_moment_report(0.5, a, 0.05)
        total = sum(rep.class_pair_counts.values())
        assert total == a.size * (a.size - 1)

    def test_histogram_matches_direct_sum(self):
        a = laws.box_set(6)
        rep = laws.second_moment_report(0.5, a, 0.05)
        tab = greens.greens_table(0.5, a.max_l1_diameter())
        goo = tab.origin()
        direct = 0.0
        pts = a.points
        for i, p in enumerate(pts):
            for j, q in enumerate(pts):
                if i == j:
                    continue
                gox = tab.value((p[0] - q[0], p[1] - q[1]))
                direct += (goo * goo - gox * gox) ** (-rep.u_eval)
        assert rep.all_pairs_sum == pytest.approx(direct, rel=1e-9)

    def test_guard(self):
        with pytest.raises(ValueError):
            laws.second_moment_report(0.5, laws.box_set(101), 0.05)

    def test_asymptotic_rows_flagged(self):
        rep = laws.second_moment_report(0.5, laws.box_set(8), 0.05)
        by_check = {v.check: v for v in rep.verdicts}
        assert by_check["pair-sum-medium-1"].verdict == VERDICT_NOT_MET
        assert by_check["kappa-inverse-upper"].verdict == VERDICT_NOT_MET

    def test_no_failures_on_reference_box(self):
        mu = greens.mu_gamma_o(0.5).value
        eps = 1.0 / (100.0 * mu)
        rep = laws.second_moment_report(0.5, laws.box_set(16), eps)
        assert not [v for v in rep.verdicts if v.verdict == VERDICT_FAILS]


class TestSimpleCdfs:
    def test_gumbel_values(self):
        assert laws.gumbel_cdf(0.0) == pytest.approx(math.exp(-1))
        assert laws.gumbel_cdf(50.0) == pytest.approx(1.0)
        assert laws.gumbel_cdf(-math.log(math.log(2))) == pytest.approx(0.5)

    def test_gumbel_monotone(self):
        zs = np.linspace(-5, 5, 101)
        vals = [laws.gumbel_cdf(z) for z in zs]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_one_point_law(self):
        assert laws.one_point_law(0.0) == 0.0
        assert laws.one_point_law(math.log(2)) == pytest.approx(0.5)
        with pytest.raises(ValueError):
            laws.one_point_law(-0.1)
