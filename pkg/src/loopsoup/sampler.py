"""Exact sampling of the timestamped soup, truncated in loop length.

The rooted representation makes this exact: the soup restricted to loops of
half-length m <= n_trunc and roots in a window is a Poisson process with,
per root, total mass sum_m w_m where w_m = (L_{2m}/(2m)) beta^{2m}.  Loop
counts are Poisson, half-lengths follow the normalized w, timestamps are
uniform marks, and the loop shape is a pair of independent +-1 bridges in
the diagonal coordinates (every closed walk corresponds to exactly one such
pair, so bridge shuffling is uniform over the C(2m,m)^2 rooted loops).

Because the rooted measure pushes forward to the unrooted one, coverage
functionals of this sample agree in law with the unrooted soup truncated at
the same length; no multiplicity bookkeeping is needed.
"""

from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import Box, Point, STEP_DX, STEP_DY, l1
from .rng import philox_key, root_stream
from .series import (SeriesTruncationError, exp_tail_bound, loop_term_array,
                     step_weight)

#: Ceiling on the truncation half-length a sampler is willing to prepare.
DEFAULT_N_TRUNC_CEILING = 1 << 22


def required_n_trunc(kappa: float, tail_tol: float,
                     ceiling: int = DEFAULT_N_TRUNC_CEILING) -> int:
    """Smallest N with N*kappa >= 1/2 and certified pmf tail below tail_tol.

    The omitted mass beyond N is at most 4 exp(-N kappa/4) / (2(N+1)).
    """
    if tail_tol <= 0:
        raise ValueError("tail_tol must be > 0")
    n = max(1, math.ceil(0.5 / kappa))
    while exp_tail_bound(kappa, n) / (2.0 * (n + 1)) > tail_tol:
        n = max(n + 1, int(n * 1.21))
        if n > ceiling:
            raise SeriesTruncationError(
                f"length truncation exceeds ceiling {ceiling} at kappa={kappa:g}")
    return n


def _alias_setup(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Standard alias-table construction for O(1) discrete sampling."""
    k = len(probs)
    q = probs * k
    J = np.zeros(k, dtype=np.int64)
    smaller = [i for i in range(k) if q[i] < 1.0]
    larger = [i for i in range(k) if q[i] >= 1.0]
    while smaller and larger:
        small, large = smaller.pop(), larger.pop()
        J[small] = large
        q[large] -= 1.0 - q[small]
        (smaller if q[large] < 1.0 else larger).append(large)
    return J, q


@dataclass(frozen=True)
class LengthDistribution:
    """Truncated half-length law of rooted loops at one vertex.

    weights[m-1] = (L_{2m}/(2m)) beta^{2m} for m = 1..n_trunc; total_mass is
    their sum (the truncated per-vertex intensity) and tail_mass_bound a
    certified cap on what truncation discarded.
    """

    kappa: float
    n_trunc: int
    weights: np.ndarray
    total_mass: float
    tail_mass_bound: float
    _pmf: np.ndarray = field(repr=False)
    _cdf: np.ndarray = field(repr=False)
    _alias_j: np.ndarray = field(repr=False)
    _alias_q: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, kappa: float, tail_tol: float,
              ceiling: int = DEFAULT_N_TRUNC_CEILING) -> "LengthDistribution":
        n = required_n_trunc(kappa, tail_tol, ceiling)
        t = loop_term_array(kappa, n)
        weights = t / (2.0 * np.arange(1, n + 1, dtype=np.float64))
        total = float(weights.sum())
        pmf = weights / total
        J, q = _alias_setup(pmf.copy())
        return cls(kappa=kappa, n_trunc=n, weights=weights, total_mass=total,
                   tail_mass_bound=exp_tail_bound(kappa, n) / (2.0 * (n + 1)),
                   _pmf=pmf, _cdf=np.cumsum(pmf), _alias_j=J, _alias_q=q)

    def pmf(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=np.int64)
        return self._pmf[m - 1]

    def mass_at_least(self, delta) -> np.ndarray:
        """Truncated intensity of loops with half-length >= delta (0 -> all)."""
        d = np.maximum(np.asarray(delta, dtype=np.int64), 1)
        # reversed cumsum keeps the suffix exact (no cancellation at the tail)
        suffix = np.cumsum(self.weights[::-1])[::-1]
        out = np.where(d <= self.n_trunc, suffix[np.minimum(d, self.n_trunc) - 1], 0.0)
        return out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Alias-method draws of half-lengths, O(1) each."""
        kk = rng.integers(0, self.n_trunc, size=size)
        keep = rng.random(size) < self._alias_q[kk]
        return np.where(keep, kk, self._alias_j[kk]) + 1

    def sample_at_least(self, rng: np.random.Generator,
                        min_half_length: np.ndarray) -> np.ndarray:
        """Draws conditioned on half-length >= the per-draw minimum."""
        d = np.maximum(np.asarray(min_half_length, dtype=np.int64), 1)
        if np.any(d > self.n_trunc):
            raise ValueError("conditional minimum exceeds truncation")
        lo = np.concatenate(([0.0], self._cdf))[d - 1]
        u = lo + rng.random(d.shape) * np.maximum(self._cdf[-1] - lo, 0.0)
        m = np.searchsorted(self._cdf, u, side="right") + 1
        return np.minimum(np.maximum(m, d), self.n_trunc)


def length_pmf(kappa: float, tail_tol: float,
               ceiling: int = DEFAULT_N_TRUNC_CEILING) -> LengthDistribution:
    return LengthDistribution.build(kappa, tail_tol, ceiling)


# ---------------------------------------------------------------------------
# Loop shapes

#.. step codes 0=E,1=N,2=W,3=S; diagonal increments per code:
#    ds = +1 for E,N and -1 for W,S;  dd = +1 for N,W and -1 for E,S.


def bridge_steps(rng: np.random.Generator, half_length: int,
                 count: int = 1) -> np.ndarray:
    """(count, 2m) arrays of step codes, uniform over closed 2m-step walks.

    Each row shuffles m plus-ones and m minus-ones independently in the two
    diagonal coordinates (rank trick: order statistics of uniforms).
    """
    m = half_length
    if m < 1:
        raise ValueError("half_length must be >= 1")
    ds = balanced_signs(rng, count, m)
    dd = balanced_signs(rng, count, m)
    return _codes_from_diagonal(ds, dd)


def balanced_signs(rng: np.random.Generator, count: int, m: int) -> np.ndarray:
    """(count, 2m) rows of m plus-ones and m minus-ones in uniform order."""
    order = np.argsort(rng.random((count, 2 * m)), axis=1, kind="stable")
    sgn = np.empty((count, 2 * m), dtype=np.int8)
    np.put_along_axis(sgn, order[:, :m], 1, axis=1)
    np.put_along_axis(sgn, order[:, m:], -1, axis=1)
    return sgn


def _codes_from_diagonal(ds: np.ndarray, dd: np.ndarray) -> np.ndarray:
    return np.where(ds > 0, np.where(dd > 0, 1, 0),
                    np.where(dd > 0, 2, 3)).astype(np.int8)


@dataclass(frozen=True)
class RootedLoop:
    """A rooted loop: root vertex plus an even closed step sequence."""

    root: Point
    steps: np.ndarray  # int8 codes, length 2m

    @property
    def half_length(self) -> int:
        return len(self.steps) // 2

    def vertices(self) -> np.ndarray:
        """Visited vertices in walk order, root first (length 2m)."""
        x = np.concatenate(([self.root[0]], self.root[0]
                            + np.cumsum(STEP_DX[self.steps])))[:-1]
        y = np.concatenate(([self.root[1]], self.root[1]
                            + np.cumsum(STEP_DY[self.steps])))[:-1]
        return np.stack([x, y], axis=1)

    def trace(self) -> set[Point]:
        return {(int(a), int(b)) for a, b in self.vertices()}


def sample_rooted_loop(rng: np.random.Generator, root: Point,
                       half_length: int) -> RootedLoop:
    """One uniform rooted loop of length 2*half_length at root."""
    return RootedLoop(root=root, steps=bridge_steps(rng, half_length, 1)[0])


def loop_trace(loop: RootedLoop) -> set[Point]:
    """Set of distinct vertices the loop visits (root included)."""
    return loop.trace()


def pack_steps(steps: np.ndarray) -> bytes:
    """Pack 2-bit step codes, four per byte (little-end first)."""
    s = np.asarray(steps, dtype=np.uint8)
    pad = (-len(s)) % 4
    if pad:
        s = np.concatenate([s, np.zeros(pad, dtype=np.uint8)])
    s = s.reshape(-1, 4)
    return (s[:, 0] | (s[:, 1] << 2) | (s[:, 2] << 4) | (s[:, 3] << 6)).tobytes()


def unpack_steps(buf: bytes, n_steps: int) -> np.ndarray:
    raw = np.frombuffer(buf, dtype=np.uint8)
    out = np.empty(len(raw) * 4, dtype=np.int8)
    for k in range(4):
        out[k::4] = (raw >> (2 * k)) & 3
    return out[:n_steps]


# ---------------------------------------------------------------------------
# Window soups


@dataclass
class SoupSample:
    """Soup restricted to roots in a window, lengths <= 2 n_trunc, t <= horizon.

    Loops live in parallel arrays; steps are packed 2-bit sequences.  The
    sample is a pure function of (seed, kappa, window, horizon, tail_tol):
    every (root, time-slice) pair owns a disjoint counter block of the
    keyed Philox stream, so neither iteration order nor extension history
    changes any draw.
    """

    kappa: float
    window: Box
    time_horizon: float
    n_trunc: int
    tail_tol: float
    seed: int
    n_slices: int
    root_x: np.ndarray
    root_y: np.ndarray
    half_length: np.ndarray
    timestamp: np.ndarray
    steps_packed: list[bytes]

    def __len__(self) -> int:
        return len(self.timestamp)

    def loop(self, i: int) -> RootedLoop:
        return RootedLoop(root=(int(self.root_x[i]), int(self.root_y[i])),
                          steps=unpack_steps(self.steps_packed[i],
                                             2 * int(self.half_length[i])))

    def loops(self):
        return (self.loop(i) for i in range(len(self)))

    def root_counts(self) -> dict[Point, int]:
        out: dict[Point, int] = {}
        for x, y in zip(self.root_x.tolist(), self.root_y.tolist()):
            out[(x, y)] = out.get((x, y), 0) + 1
        return out


def _sample_slice(seed: int, kappa: float, window: Box, t0: float, t1: float,
                  time_slice: int, dist: LengthDistribution):
    key = philox_key(seed)
    rate = (t1 - t0) * dist.total_mass
    rx, ry, hl, ts, packed = [], [], [], [], []
    for x in range(window.x0, window.x1 + 1):
        for y in range(window.y0, window.y1 + 1):
            rng = root_stream(key, (x, y), replica=0, time_slice=time_slice)
            k = int(rng.poisson(rate))
            if k == 0:
                continue
            ms = dist.sample(rng, k)
            times = t0 + (t1 - t0) * rng.random(k)
            for i in range(k):
                m = int(ms[i])
                steps = bridge_steps(rng, m, 1)[0]
                rx.append(x)
                ry.append(y)
                hl.append(m)
                ts.append(float(times[i]))
                packed.append(pack_steps(steps))
    return (np.array(rx, dtype=np.int32), np.array(ry, dtype=np.int32),
            np.array(hl, dtype=np.int32), np.array(ts, dtype=np.float64),
            packed)


def sample_window_soup(seed: int, kappa: float, window: Box | tuple,
                       time_horizon: float, tail_tol: float,
                       ceiling: int = DEFAULT_N_TRUNC_CEILING) -> SoupSample:
    """Exact truncated soup over a window of roots up to a time horizon."""
    if time_horizon < 0:
        raise ValueError("time_horizon must be >= 0")
    if not isinstance(window, Box):
        window = Box(*window)
    dist = LengthDistribution.build(kappa, tail_tol, ceiling)
    if time_horizon == 0:
        empty = np.array([], dtype=np.int32)
        return SoupSample(kappa=kappa, window=window, time_horizon=0.0,
                          n_trunc=dist.n_trunc, tail_tol=tail_tol, seed=seed,
                          n_slices=0, root_x=empty, root_y=empty,
                          half_length=empty.copy(),
                          timestamp=np.array([], dtype=np.float64),
                          steps_packed=[])
    rx, ry, hl, ts, packed = _sample_slice(seed, kappa, window, 0.0,
                                           time_horizon, 0, dist)
    return SoupSample(kappa=kappa, window=window, time_horizon=time_horizon,
                      n_trunc=dist.n_trunc, tail_tol=tail_tol, seed=seed,
                      n_slices=1, root_x=rx, root_y=ry, half_length=hl,
                      timestamp=ts, steps_packed=packed)


def extend_soup(soup: SoupSample, delta_horizon: float) -> SoupSample:
    """Fresh, independent loops on (horizon, horizon + delta]; the union has
    exactly the law of sampling the longer horizon at once."""
    if delta_horizon < 0:
        raise ValueError("delta_horizon must be >= 0")
    if delta_horizon == 0:
        return soup
    dist = LengthDistribution.build(soup.kappa, soup.tail_tol)
    t0 = soup.time_horizon
    rx, ry, hl, ts, packed = _sample_slice(soup.seed, soup.kappa, soup.window,
                                           t0, t0 + delta_horizon,
                                           soup.n_slices, dist)
    return SoupSample(kappa=soup.kappa, window=soup.window,
                      time_horizon=t0 + delta_horizon, n_trunc=soup.n_trunc,
                      tail_tol=soup.tail_tol, seed=soup.seed,
                      n_slices=soup.n_slices + 1,
                      root_x=np.concatenate([soup.root_x, rx]),
                      root_y=np.concatenate([soup.root_y, ry]),
                      half_length=np.concatenate([soup.half_length, hl]),
                      timestamp=np.concatenate([soup.timestamp, ts]),
                      steps_packed=soup.steps_packed + packed)


def truncation_bias_rate(dist: LengthDistribution, target: Box) -> float:
    """Certified intensity of discarded loops that could have hit the target.

    A discarded loop has half-length m > n_trunc and reaches at most m from
    its root, so only roots with delta(root) <= m matter.  Summing the tail
    bound ring by ring converges geometrically; the result times an
    evaluation time u bounds any coverage-probability bias at u.
    """
    n = dist.n_trunc
    kappa = dist.kappa
    rate = 0.0
    # Roots within the truncation range of the target all see the same tail.
    inside = sum(target.ring_count(d) for d in range(0, n + 1))
    rate += inside * dist.tail_mass_bound
    d = n + 1
    while True:
        term = target.ring_count(d) * exp_tail_bound(kappa, d - 1) / (2.0 * d)
        rate += term
        if term < 1e-22 * max(rate, 1e-300):
            return rate
        d += 1
