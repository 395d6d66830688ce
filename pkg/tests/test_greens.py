import math

import numpy as np
import pytest

from loopsoup import greens
from loopsoup.records import VERDICT_FAILS, VERDICT_HOLDS, VERDICT_NOT_MET
from loopsoup.series import SeriesTruncationError, exp_tail_bound
from loopsoup.walks import count_walks_diagonal


class TestGreensValue:
    def test_above_first_term_at_unit_kappa(self):
        v, _ = greens.greens_value(1.0, (0, 0))
        assert v > 1.0

    def test_origin_enclosure_at_small_kappa(self):
        v, _ = greens.greens_value(0.01, (0, 0))
        assert 2.041 <= v <= 3.466

    def test_gap_exceeds_three_quarters(self):
        goo, _ = greens.greens_value(0.1, (0, 0))
        gox, _ = greens.greens_value(0.1, (1, 0))
        assert goo - gox >= 0.75

    def test_kappa_validation(self):
        with pytest.raises(ValueError):
            greens.greens_value(-0.5, (0, 0))

    def test_truncation_self_consistency(self):
        for x in ((0, 0), (3, 1)):
            v1, _ = greens.greens_value(0.05, x, 1e-8)
            v2, _ = greens.greens_value(0.05, x, 1e-9)
            assert abs(v1 - v2) <= 1e-8 * abs(v1)

    def test_unreachable_truncation_raises(self):
        with pytest.raises(SeriesTruncationError):
            greens.greens_value(1e-9, (0, 0), m_ceiling=10_000)

    def test_matches_exact_partial_sum_plus_tail(self, big_walk_table):
        beta = 1.0 / 4.25
        for x in ((0, 0), (1, 0), (2, 2), (5, 0)):
            partial = sum(beta ** n * big_walk_table.count(n, x)
                          for n in range(0, 201))
            v, _ = greens.greens_value(0.25, x)
            assert partial <= v + 1e-12
            assert v - partial <= exp_tail_bound(0.25, 100)


class TestGreensTable:
    def test_swap_symmetry(self):
        t = greens.greens_table(0.1, 10)
        for x in ((3, 1), (2, 5), (4, 4)):
            assert t.value(x) == t.value((x[1], x[0]))
            assert t.value(x) == t.value((-x[0], x[1]))

    def test_pointwise_monotone_in_kappa(self):
        t1 = greens.greens_table(0.1, 10)
        t2 = greens.greens_table(0.2, 10)
        assert all(t2.value(p) < t1.value(p) for p in t1.points())

    def test_medium_distance_gap(self):
        t = greens.greens_table(0.01, 5)
        assert t.origin() - t.value((4, 0)) >= math.log(4) / math.pi

    def test_decay_with_distance(self):
        t = greens.greens_table(0.25, 16)
        for r in (8, 16):
            assert t.value((r, 0)) < t.value((r // 2, 0))

    def test_odd_point_neighbor_identity(self):
        t = greens.greens_table(0.3, 6)
        beta = t.g_normalization
        lhs = t.value((3, 2))
        rhs = beta * sum(t.value(y) for y in ((4, 2), (2, 2), (3, 3), (3, 1)))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_g_normalization(self):
        t = greens.greens_table(0.5, 3)
        assert t.g((1, 1)) == pytest.approx(t.value((1, 1)) / 4.5)


class TestMuGammaO:
    def test_exp_mu_equals_greens(self):
        mu = greens.mu_gamma_o(0.01)
        assert math.exp(mu.value) == pytest.approx(
            greens.greens_value(0.01, (0, 0))[0], rel=1e-14)
        assert mu.method == "series"

    def test_enclosure_endpoints(self):
        mu = greens.mu_gamma_o(0.01)
        lo = math.log(math.log(100) / math.pi + 1 - 4 / (3 * math.pi))
        hi = math.log(math.log(100) / math.pi + 2)
        assert mu.enclosure == pytest.approx((lo, hi))
        assert mu.contains(mu.value)

    def test_deep_kappa_loglog_window(self):
        mu = greens.mu_gamma_o(math.exp(-30))
        assert mu.method == "enclosure"
        assert abs(mu.value - math.log(30)) < 2.0


class TestRootedIntensity:
    def test_lower_bound_first_term(self):
        for kappa in (1.0, 0.25, 0.05):
            assert greens.rooted_intensity(kappa) > 2.0 / (4 + kappa) ** 2

    def test_monotone_in_kappa(self):
        vals = [greens.rooted_intensity(k) for k in (1.0, 0.5, 0.1)]
        assert vals[0] < vals[1] < vals[2]

    def test_doubled_truncation_cross_check(self):
        v, m_trunc, _ = greens.rooted_intensity_detail(0.1, 1e-8)
        from loopsoup.series import loop_term_array
        t = loop_term_array(0.1, 2 * m_trunc)
        direct = float((t / (2.0 * np.arange(1, 2 * m_trunc + 1))).sum())
        assert abs(direct - v) <= 1e-8 * v


class TestBoundReports:
    def test_grid_bounds_all_hold(self):
        verdicts = greens.check_green_bounds([0.1, 0.01], radius=12)
        assert verdicts
        assert not [v for v in verdicts if v.verdict == VERDICT_FAILS]
        held = {v.check for v in verdicts if v.verdict == VERDICT_HOLDS}
        assert {"partial-sum-lower", "origin-lower", "origin-upper",
                "gap-three-quarters", "gap-log-over-pi",
                "diag-neighbor-lower", "mu-enclosure"} <= held

    def test_asymptotic_rows_flagged(self):
        verdicts = greens.check_green_bounds([0.1], radius=20)
        flagged = {v.check for v in verdicts if v.verdict == VERDICT_NOT_MET}
        assert "far-point-half" in flagged
        assert "short-walk-contrib" in flagged

    def test_unit_kappa_upper_enclosure_not_met(self):
        verdicts = greens.check_green_bounds([2.0], radius=6)
        row = [v for v in verdicts if v.check == "origin-upper"][0]
        assert row.verdict == VERDICT_NOT_MET


class TestAppendix:
    def test_stirling_at_one(self):
        lo = math.sqrt(2 * math.pi) * math.exp(-1)
        hi = lo * math.exp(1.0 / 12)
        assert lo <= 1.0 <= hi

    def test_report_holds(self):
        rep = greens.verify_appendix_bounds(60)
        assert rep.ok
        assert math.isfinite(rep.c_star)

    def test_local_probability_spot_value(self):
        # four 4-step walks reach (3,1): P(S_4=(3,1)) = 4/256
        assert count_walks_diagonal(4, (3, 1)) == 4

    def test_c_star_stability(self, big_walk_table):
        c50 = greens.local_clt_min_constant(big_walk_table, 50)
        c100 = greens.local_clt_min_constant(big_walk_table, 100)
        assert abs(c100 - c50) <= 0.1 * max(abs(c50), 1e-9)
