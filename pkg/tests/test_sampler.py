import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2

from loopsoup import greens, laws, sampler
from loopsoup.lattice import Box, STEP_DX, STEP_DY, l1
from loopsoup.series import SeriesTruncationError


class TestLengthDistribution:
    def test_pmf_normalized(self):
        d = sampler.length_pmf(0.5, 1e-8)
        assert d._pmf.sum() == pytest.approx(1.0)
        assert d.n_trunc * 0.5 >= 0.5

    def test_weight_ratio(self):
        d = sampler.length_pmf(0.3, 1e-8)
        beta = 1.0 / 4.3
        assert d.weights[1] / d.weights[0] == pytest.approx(4.5 * beta * beta)

    def test_total_mass_vs_intensity(self):
        d = sampler.length_pmf(0.4, 1e-10)
        full = greens.rooted_intensity(0.4, 1e-13)
        assert d.total_mass <= full + 1e-15
        assert full - d.total_mass <= d.tail_mass_bound

    def test_truncation_ceiling(self):
        with pytest.raises(SeriesTruncationError):
            sampler.length_pmf(1e-7, 1e-12, ceiling=1000)

    def test_mass_at_least_suffix(self):
        d = sampler.length_pmf(0.5, 1e-6)
        m = d.mass_at_least(np.array([0, 1, 2, d.n_trunc, d.n_trunc + 5]))
        assert m[0] == m[1] == pytest.approx(d.total_mass)
        assert m[2] == pytest.approx(d.total_mass - d.weights[0])
        assert m[3] == pytest.approx(d.weights[-1])
        assert m[4] == 0.0

    def test_alias_draws_match_pmf(self, rng):
        d = sampler.length_pmf(0.5, 1e-8)
        draws = d.sample(rng, 100_000)
        counts = np.bincount(draws, minlength=d.n_trunc + 1)[1:]
        expected = 100_000 * d._pmf
        keep = expected >= 5
        stat = float(((counts[keep] - expected[keep]) ** 2 / expected[keep]).sum())
        assert chi2.sf(stat, int(keep.sum()) - 1) > 0.001

    def test_conditional_draws_respect_floor(self, rng):
        d = sampler.length_pmf(0.5, 1e-8)
        floor = rng.integers(1, 20, size=5000)
        draws = d.sample_at_least(rng, floor)
        assert (draws >= floor).all()


class TestBridges:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 40), st.integers(0, 2 ** 31))
    def test_closure(self, m, seed):
        rng = np.random.default_rng(seed)
        steps = sampler.bridge_steps(rng, m, 4)
        assert (STEP_DX[steps].sum(axis=1) == 0).all()
        assert (STEP_DY[steps].sum(axis=1) == 0).all()

    def test_two_step_loops_uniform(self, rng):
        # the 4 two-step loops are EW, WE, NS, SN with probability 1/4 each
        steps = sampler.bridge_steps(rng, 1, 100_000)
        codes = steps[:, 0] * 4 + steps[:, 1]
        counts = np.bincount(codes, minlength=16)
        hit = {int(c) for c in np.nonzero(counts)[0]}
        assert hit == {0 * 4 + 2, 2 * 4 + 0, 1 * 4 + 3, 3 * 4 + 1}
        stat = (((counts[sorted(hit)] - 25_000) ** 2) / 25_000).sum()
        assert chi2.sf(stat, 3) > 0.001

    def test_four_step_loops_uniform(self, rng):
        # 36 rooted loops of length 4, all equally likely
        steps = sampler.bridge_steps(rng, 2, 100_000).astype(np.int64)
        codes = ((steps[:, 0] * 4 + steps[:, 1]) * 4 + steps[:, 2]) * 4 + steps[:, 3]
        counts = np.bincount(codes, minlength=256)
        support = np.nonzero(counts)[0]
        assert len(support) == 36
        expected = 100_000 / 36
        stat = (((counts[support] - expected) ** 2) / expected).sum()
        assert chi2.sf(stat, 35) > 0.001

    def test_trace_examples(self, rng):
        loop = sampler.RootedLoop(root=(0, 0),
                                  steps=np.array([0, 1, 2, 3], dtype=np.int8))
        assert loop.trace() == {(0, 0), (1, 0), (1, 1), (0, 1)}
        two = sampler.sample_rooted_loop(rng, (5, -2), 1)
        assert len(two.trace()) == 2 and (5, -2) in two.trace()

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 30), st.integers(0, 2 ** 31))
    def test_trace_size_and_excursion(self, m, seed):
        rng = np.random.default_rng(seed)
        loop = sampler.sample_rooted_loop(rng, (3, 4), m)
        tr = loop.trace()
        assert 2 <= len(tr) <= 2 * m
        assert max(abs(a - 3) + abs(b - 4) for a, b in tr) <= m

    def test_pack_roundtrip(self, rng):
        for m in (1, 2, 3, 17):
            steps = sampler.bridge_steps(rng, m, 1)[0]
            assert np.array_equal(
                sampler.unpack_steps(sampler.pack_steps(steps), 2 * m), steps)


class TestWindowSoup:
    def test_zero_horizon_empty(self):
        soup = sampler.sample_window_soup(1, 0.5, Box(0, 0, 3, 3), 0.0, 1e-6)
        assert len(soup) == 0

    def test_roots_and_timestamps_in_range(self):
        soup = sampler.sample_window_soup(1, 0.5, Box(-2, -2, 2, 2), 3.0, 1e-6)
        assert all(soup.window.contains((int(x), int(y)))
                   for x, y in zip(soup.root_x, soup.root_y))
        assert (soup.timestamp >= 0).all() and (soup.timestamp <= 3.0).all()

    def test_deterministic(self):
        a = sampler.sample_window_soup(9, 0.5, Box(0, 0, 4, 4), 2.0, 1e-6)
        b = sampler.sample_window_soup(9, 0.5, Box(0, 0, 4, 4), 2.0, 1e-6)
        assert np.array_equal(a.timestamp, b.timestamp)
        assert np.array_equal(a.half_length, b.half_length)
        assert a.steps_packed == b.steps_packed

    def test_mean_loop_count(self):
        # aggregate 60 disjoint-seed soups: mean count within 3 SE of
        # |window| * horizon * total_mass
        d = sampler.length_pmf(0.5, 1e-6)
        box = Box(0, 0, 4, 4)
        expect = box.area * 2.0 * d.total_mass
        counts = [len(sampler.sample_window_soup(s, 0.5, box, 2.0, 1e-6))
                  for s in range(60)]
        se = math.sqrt(expect / 60)  # Poisson variance
        assert abs(np.mean(counts) - expect) <= 3 * se

    def test_extension_disjoint_and_equal_in_law(self):
        base = sampler.sample_window_soup(3, 0.5, Box(0, 0, 3, 3), 1.0, 1e-6)
        ext = sampler.extend_soup(base, 1.5)
        assert ext.time_horizon == 2.5
        new = ext.timestamp[len(base):]
        assert (new > 1.0).all() and (new <= 2.5).all()
        assert sampler.extend_soup(base, 0.0) is base

    def test_extension_count_law(self):
        # loop counts of sample(T)+extend(T) match Poisson(2T mass) moments
        d = sampler.length_pmf(0.6, 1e-6)
        box = Box(0, 0, 2, 2)
        lam = box.area * 2.0 * d.total_mass
        counts = []
        for s in range(120):
            soup = sampler.extend_soup(
                sampler.sample_window_soup(s, 0.6, box, 1.0, 1e-6), 1.0)
            counts.append(len(soup))
        mean = float(np.mean(counts))
        var = float(np.var(counts))
        assert abs(mean - lam) <= 3 * math.sqrt(lam / 120)
        assert abs(var - lam) <= 5 * lam / math.sqrt(120)

    def test_one_point_avoidance_against_law(self):
        # raw window-soup path (no thinning): P(o uncovered at u) = G^{-u};
        # coarse replica count because this is the slow structural route,
        # cross-checked at scale through the cover engine elsewhere
        kappa, u, reps = 2.0, 1.0, 200
        d = sampler.length_pmf(kappa, 1e-6)
        win = Box(-d.n_trunc, -d.n_trunc, d.n_trunc, d.n_trunc)
        misses = 0
        for s in range(reps):
            soup = sampler.sample_window_soup(s, kappa, win, u, 1e-6)
            hit = any((0, 0) in soup.loop(i).trace() for i in range(len(soup)))
            misses += not hit
        p = laws.prob_point_uncovered(kappa, u)
        bias = u * sampler.truncation_bias_rate(d, Box(0, 0, 0, 0))
        se = math.sqrt(p * (1 - p) / reps)
        assert abs(misses / reps - p) <= 3 * se + bias


class TestBiasRate:
    def test_decreases_with_tolerance(self):
        d1 = sampler.length_pmf(0.5, 1e-6)
        d2 = sampler.length_pmf(0.5, 1e-10)
        t = Box(0, 0, 7, 7)
        assert sampler.truncation_bias_rate(d2, t) \
            < sampler.truncation_bias_rate(d1, t)
