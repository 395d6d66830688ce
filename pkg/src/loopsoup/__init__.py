"""Simulation and numerical verification lab for the two-dimensional
killed-random-walk loop soup: exact walk combinatorics, Green's function
series with certified truncation, closed-form avoidance laws, exact
truncated soup sampling, and cover-time Monte Carlo."""

__version__ = "0.1.0"

from .cover import (BoxTarget, CoverEngine, EmpiricalDistribution,
                    PointsTarget, cover_time, cover_time_ensemble,
                    ks_distance, make_target)
from .greens import (GreensTable, MuGammaO, check_green_bounds, greens_table,
                     greens_value, mu_gamma_o, rooted_intensity,
                     verify_appendix_bounds)
from .laws import (TargetSet, expected_uncovered, gumbel_cdf, one_point_law,
                   pair_bound, prob_no_shared_loop, prob_pair_uncovered,
                   prob_point_uncovered, quasi_independence_bound,
                   second_moment_report, u_star)
from .sampler import (LengthDistribution, RootedLoop, SoupSample, extend_soup,
                      length_pmf, loop_trace, sample_rooted_loop,
                      sample_window_soup)
from .walks import (WalkCountTable, count_loops_closed_form,
                    count_walks_bruteforce, count_walks_diagonal,
                    count_walks_dp, verify_dominance)
