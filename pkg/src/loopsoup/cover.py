"""Cover-time Monte Carlo for finite target sets.

The engine samples, exactly, the loops of the truncated soup that are able
to touch the target: a loop of half-length m reaches at most m from its
root, so the relevant sub-process has root intensity mass(>= delta(root))
with delta the L1 distance to the target.  Roots are drawn ring by ring
(Poisson counts per ring, uniform placement), lengths from the conditional
law m >= delta, timestamps as uniform marks, shapes as diagonal bridges.
Per-vertex first-cover times are folded in streamwise; the horizon starts
at twice the expected cover time and doubles until the set is covered.
Discarding loops that provably cannot intersect the target leaves the law
of every coverage functional unchanged, and each truncation carries a
certified bias rate that reports add to their statistical error.

Replicas are grouped in fixed-size blocks with independently keyed
streams; results merge by block index, so worker count never changes any
number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .greens import greens_table, mu_gamma_o
from .lattice import Box, Point
from .records import (PLUMBING, VERDICT_FAILS, VERDICT_HOLDS,
                      VERDICT_NOT_MET, VERDICT_REPORTED, Verdict)
from .rng import block_stream
from .sampler import LengthDistribution, balanced_signs
from .series import exp_tail_bound

REPLICA_BLOCK = 4096
_CELL_BUDGET = 24_000_000
_MAX_DOUBLINGS = 48


class ResourceCeilingError(RuntimeError):
    """Requested run exceeds the configured work guard."""


# ---------------------------------------------------------------------------
# Targets


class BoxTarget:
    """n x n box of vertices anchored at the origin corner."""

    def __init__(self, side: int):
        if side < 1:
            raise ValueError("side must be >= 1")
        self.box = Box(0, 0, side - 1, side - 1)
        self.side = side

    @property
    def size(self) -> int:
        return self.box.area

    @property
    def label(self) -> str:
        return f"box:{self.side}"

    def points(self) -> list[Point]:
        return [(i, j) for i in range(self.side) for j in range(self.side)]

    def ring_count(self, delta: int) -> int:
        return self.box.ring_count(delta)

    def root_coords(self, rng, delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        counts = np.array([self.ring_count(int(d)) if d > 0 else self.size
                           for d in delta], dtype=np.int64)
        idx = np.minimum((rng.random(len(delta)) * counts).astype(np.int64),
                         counts - 1)
        x = np.empty(len(delta), dtype=np.int64)
        y = np.empty(len(delta), dtype=np.int64)
        inside = delta == 0
        if inside.any():
            h = self.box.height
            x[inside] = self.box.x0 + idx[inside] // h
            y[inside] = self.box.y0 + idx[inside] % h
        out = ~inside
        if out.any():
            x[out], y[out] = _box_ring_cells_vec(self.box, delta[out], idx[out])
        return x, y

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.box.distance(x, y)

    def vertex_index(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        inside = ((x >= self.box.x0) & (x <= self.box.x1)
                  & (y >= self.box.y0) & (y <= self.box.y1))
        idx = (x - self.box.x0) * self.box.height + (y - self.box.y0)
        return np.where(inside, idx, -1)

    def acceptance(self, x, y, delta):  # box rings never overshoot
        return None


class PointsTarget:
    """Sparse explicit point set; roots come from per-point rings with
    acceptance correction on the overlap of the superposed intensities."""

    def __init__(self, points: list[Point]):
        if not points:
            raise ValueError("need at least one point")
        if len(set(points)) != len(points):
            raise ValueError("duplicate points")
        self.pts = np.asarray(points, dtype=np.int64)
        keys = self._key(self.pts[:, 0], self.pts[:, 1])
        order = np.argsort(keys)
        self._sorted_keys = keys[order]
        self._order = order

    @staticmethod
    def _key(x, y):
        return (x.astype(np.int64) << 24) ^ (y.astype(np.int64) + (1 << 22))

    @property
    def size(self) -> int:
        return len(self.pts)

    @property
    def label(self) -> str:
        return "points:" + ";".join(f"({int(a)},{int(b)})" for a, b in self.pts)

    def points(self) -> list[Point]:
        return [(int(a), int(b)) for a, b in self.pts]

    def ring_count(self, delta: int) -> int:
        # superposed candidate rings over all centers (overlaps corrected
        # by the acceptance step)
        return self.size * (4 * delta if delta > 0 else 1)

    def root_coords(self, rng, delta):
        n = len(delta)
        center = rng.integers(0, self.size, size=n)
        cx, cy = self.pts[center, 0], self.pts[center, 1]
        x, y = cx.copy(), cy.copy()
        ring = delta > 0
        if ring.any():
            d = delta[ring]
            idx = np.minimum((rng.random(int(ring.sum())) * 4 * d).astype(np.int64),
                             4 * d - 1)
            ox, oy = _point_ring_offsets(d, idx)
            x[ring] = cx[ring] + ox
            y[ring] = cy[ring] + oy
        return x, y

    def distance(self, x, y):
        dx = np.abs(x[:, None] - self.pts[None, :, 0])
        dy = np.abs(y[:, None] - self.pts[None, :, 1])
        return (dx + dy).min(axis=1)

    def per_center_distances(self, x, y):
        dx = np.abs(x[:, None] - self.pts[None, :, 0])
        dy = np.abs(y[:, None] - self.pts[None, :, 1])
        return dx + dy

    def vertex_index(self, x, y):
        keys = self._key(x, y)
        pos = np.searchsorted(self._sorted_keys, keys)
        pos = np.minimum(pos, self.size - 1)
        hit = self._sorted_keys[pos] == keys
        return np.where(hit, self._order[pos], -1)


def _box_ring_cells_vec(box: Box, delta: np.ndarray, idx: np.ndarray):
    """Vectorized Box.ring_cells allowing a per-element delta >= 1."""
    w, h = box.width, box.height
    b0, b1, b2, b3 = w, 2 * w, 2 * w + h, 2 * w + 2 * h
    x = np.empty(len(delta), dtype=np.int64)
    y = np.empty(len(delta), dtype=np.int64)
    sel = idx < b0
    x[sel] = box.x0 + idx[sel]
    y[sel] = box.y1 + delta[sel]
    sel = (idx >= b0) & (idx < b1)
    x[sel] = box.x0 + (idx[sel] - b0)
    y[sel] = box.y0 - delta[sel]
    sel = (idx >= b1) & (idx < b2)
    x[sel] = box.x1 + delta[sel]
    y[sel] = box.y0 + (idx[sel] - b1)
    sel = (idx >= b2) & (idx < b3)
    x[sel] = box.x0 - delta[sel]
    y[sel] = box.y0 + (idx[sel] - b2)
    rem = idx - b3
    per = delta - 1
    for q, (sx, sy) in enumerate(((1, 1), (-1, 1), (1, -1), (-1, -1))):
        sel = (rem >= q * per) & (rem < (q + 1) * per) & (per > 0)
        a = rem[sel] - q * per[sel] + 1
        x[sel] = (box.x1 + a) if sx > 0 else (box.x0 - a)
        y[sel] = (box.y1 + (delta[sel] - a)) if sy > 0 else (box.y0 - (delta[sel] - a))
    return x, y


def _point_ring_offsets(delta: np.ndarray, idx: np.ndarray):
    """Cells at L1 distance delta >= 1 from a point, by index in [0, 4 delta)."""
    side = idx // delta
    t = idx - side * delta
    ox = np.empty(len(delta), dtype=np.int64)
    oy = np.empty(len(delta), dtype=np.int64)
    for s, (fx, fy) in enumerate((
            (lambda d, t: d - t, lambda d, t: t),          # (+,0) -> (0,+)
            (lambda d, t: -t, lambda d, t: d - t),         # (0,+) -> (-,0)
            (lambda d, t: -(d - t), lambda d, t: -t),      # (-,0) -> (0,-)
            (lambda d, t: t, lambda d, t: -(d - t)))):     # (0,-) -> (+,0)
        sel = side == s
        ox[sel] = fx(delta[sel], t[sel])
        oy[sel] = fy(delta[sel], t[sel])
    return ox, oy


def make_target(spec: str):
    """Parse `box:<n>`, `points:(x,y);(x,y);...`, or `line:<k>x<sep>`."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "box":
            return BoxTarget(int(rest))
        if kind == "points":
            pts = []
            for tok in rest.split(";"):
                tok = tok.strip()
                if not (tok.startswith("(") and tok.endswith(")")):
                    raise ValueError(tok)
                a, b = tok[1:-1].split(",")
                pts.append((int(a), int(b)))
            return PointsTarget(pts)
        if kind == "line":
            k, sep = rest.split("x")
            return PointsTarget([(i * int(sep), 0) for i in range(int(k))])
    except (ValueError, TypeError) as exc:
        raise ValueError(
            f"bad set spec {spec!r}; grammar: box:<n> | "
            f"points:(x1,y1);(x2,y2);... | line:<k>x<sep>") from exc
    raise ValueError(
        f"bad set spec {spec!r}; grammar: box:<n> | "
        f"points:(x1,y1);(x2,y2);... | line:<k>x<sep>")


# ---------------------------------------------------------------------------
# Empirical distributions and KS machinery


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Sorted sample supporting exact CDF evaluation and KS distance."""

    values: np.ndarray

    @classmethod
    def from_samples(cls, values) -> "EmpiricalDistribution":
        v = np.sort(np.asarray(values, dtype=np.float64))
        if v.size < 1:
            raise ValueError("need at least one sample")
        return cls(values=v)

    @property
    def count(self) -> int:
        return int(self.values.size)

    def cdf(self, t: float) -> float:
        return float(np.searchsorted(self.values, t, side="right")) / self.count


def ks_distance(emp: EmpiricalDistribution, cdf) -> float:
    """Exact two-sided sup distance between the empirical CDF and cdf."""
    f = np.asarray(cdf(emp.values), dtype=np.float64)
    n = emp.count
    i = np.arange(1, n + 1, dtype=np.float64)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def exp1_cdf(u):
    return 1.0 - np.exp(-np.maximum(u, 0.0))


def exp1_power_cdf(k: int):
    def cdf(u):
        return (1.0 - np.exp(-np.maximum(u, 0.0))) ** k
    return cdf


def gumbel_cdf_vec(z):
    return np.exp(-np.exp(-np.clip(z, -700, 700)))


_KS_NULL_CACHE: dict = {}


def calibrated_ks_threshold(n: int, level: float = 0.999, runs: int = 800,
                            seed: int = 20260809) -> float:
    """Null KS quantile from a pre-registered calibration run.

    Sampling exactly from the target law and recording the level-quantile
    of the KS distance replaces asymptotic constants with a small-sample
    honest threshold; deterministic in (n, level, runs, seed).
    """
    key = (n, level, runs, seed)
    if key in _KS_NULL_CACHE:
        return _KS_NULL_CACHE[key]
    rng = block_stream(seed, "ks-null", n)
    out = np.empty(runs)
    chunk = max(1, min(runs, int(4e6 // max(n, 1)) or 1))
    i = np.arange(1, n + 1, dtype=np.float64)
    done = 0
    while done < runs:
        c = min(chunk, runs - done)
        u = np.sort(rng.random((c, n)), axis=1)
        d_hi = (i / n - u).max(axis=1)
        d_lo = (u - (i - 1) / n).max(axis=1)
        out[done:done + c] = np.maximum(d_hi, d_lo)
        done += c
    thr = float(np.quantile(out, level))
    _KS_NULL_CACHE[key] = thr
    return thr


# ---------------------------------------------------------------------------
# The sampling engine


@dataclass
class CoverTimeSample:
    kappa: float
    target_label: str
    target_size: int
    replicas: int
    values: EmpiricalDistribution
    truncation_bias_rate: float
    seed: int
    mu: float
    u_star: float | None

    @property
    def truncation_bias_bound(self) -> float:
        """CDF bias bound at the largest evaluated time."""
        return self.truncation_bias_rate * float(self.values.values.max())

    def scaled(self) -> EmpiricalDistribution:
        return EmpiricalDistribution.from_samples(self.mu * self.values.values)


class CoverEngine:
    """Shared machinery for cover-time and fixed-horizon event sampling."""

    def __init__(self, kappa: float, target, tail_tol: float = 1e-10,
                 rel_tol: float = 1e-10):
        self.kappa = kappa
        self.target = target
        self.dist = LengthDistribution.build(kappa, tail_tol)
        self.mu = mu_gamma_o(kappa, rel_tol).value
        n = self.dist.n_trunc
        deltas = np.arange(0, n + 1, dtype=np.int64)
        self.mass_geq = self.dist.mass_at_least(np.maximum(deltas, 1))
        self.ring_counts = np.array([target.ring_count(int(d)) for d in deltas],
                                    dtype=np.float64)
        self.class_rates = self.ring_counts * self.mass_geq
        self.rate_total = float(self.class_rates.sum())
        # mean visited cells per unit time, for memory budgeting
        mw = self.dist.weights * np.arange(1, n + 1)
        suffix_mw = mw[::-1].cumsum()[::-1]
        cells = self.ring_counts * 2.0 * suffix_mw[np.maximum(deltas, 1) - 1]
        self.cell_rate = float(cells.sum())
        self.bias_rate = self._bias_rate()
        if target.size >= 2:
            self.u_star = math.log(target.size) / self.mu
            self.horizon0 = 2.0 * self.u_star
        else:
            self.u_star = None
            self.horizon0 = 2.0 / self.mu

    def _bias_rate(self) -> float:
        n, kappa = self.dist.n_trunc, self.kappa
        rate = sum(self.target.ring_count(d) for d in range(n + 1)) \
            * self.dist.tail_mass_bound
        d = n + 1
        while True:
            term = self.target.ring_count(d) * exp_tail_bound(kappa, d - 1) / (2.0 * d)
            rate += term
            if term < 1e-22 * max(rate, 1e-300):
                return rate
            d += 1

    # -- loop stream ------------------------------------------------------

    def _draw_loops(self, rng, n_rows: int, t0: float, t1: float):
        """One Poisson slab of relevant loops over [t0, t1) for n_rows replicas.

        Returns (row, delta, x, y, m, t) arrays; thinning/acceptance against
        the exact target intensity is already applied.
        """
        lam = self.class_rates * ((t1 - t0) * n_rows)
        counts = rng.poisson(lam)
        total = int(counts.sum())
        if total == 0:
            e = np.array([], dtype=np.int64)
            return e, e, e, e, e, np.array([], dtype=np.float64)
        delta = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
        row = rng.integers(0, n_rows, size=total)
        x, y = self.target.root_coords(rng, delta)
        if isinstance(self.target, PointsTarget) and self.target.size > 1:
            per = self.target.per_center_distances(x, y)
            dmin = per.min(axis=1)
            masses = np.where(per <= self.dist.n_trunc,
                              self.mass_geq[np.minimum(per, self.dist.n_trunc)],
                              0.0)
            accept_p = self.mass_geq[dmin] / masses.sum(axis=1)
            keep = rng.random(total) < accept_p
            row, delta, x, y = row[keep], dmin[keep], x[keep], y[keep]
            total = len(row)
            u_len = rng.random(total)
        else:
            u_len = rng.random(total)
        # conditional half-length m >= max(delta, 1) by inverse CDF
        dmin1 = np.maximum(delta, 1)
        cdf = self.dist._cdf
        lo = np.concatenate(([0.0], cdf))[dmin1 - 1]
        u = lo + u_len * np.maximum(cdf[-1] - lo, 0.0)
        m = np.searchsorted(cdf, u, side="right") + 1
        m = np.minimum(np.maximum(m, dmin1), self.dist.n_trunc)
        t = t0 + (t1 - t0) * rng.random(total)
        return row, delta, x, y, m, t

    def _fold_coverage(self, rng, state, rows, x, y, m, t,
                       loop_mask_sink=None):
        """Stream loop traces into per-(row, vertex) minima.

        state is (rows, V) float64; loop_mask_sink, if given, is called per
        m-group with (rows, t, vertex-bitmask) for shared-loop statistics.
        """
        V = self.target.size
        order = np.argsort(m, kind="stable")
        m_sorted = m[order]
        bounds = np.searchsorted(m_sorted, np.arange(1, self.dist.n_trunc + 2))
        flat = state.reshape(-1)
        start = 0
        for mi in range(1, self.dist.n_trunc + 1):
            stop = bounds[mi]
            if stop == start:
                continue
            sel = order[start:stop]
            start = stop
            g = len(sel)
            ds = balanced_signs(rng, g, mi).astype(np.int32)
            dd = balanced_signs(rng, g, mi).astype(np.int32)
            sx = (ds - dd) >> 1
            sy = (ds + dd) >> 1
            np.cumsum(sx, axis=1, out=sx)
            np.cumsum(sy, axis=1, out=sy)
            px = np.empty((g, 2 * mi), dtype=np.int64)
            py = np.empty((g, 2 * mi), dtype=np.int64)
            px[:, 0] = x[sel]
            py[:, 0] = y[sel]
            px[:, 1:] = x[sel, None] + sx[:, :-1]
            py[:, 1:] = y[sel, None] + sy[:, :-1]
            vi = self.target.vertex_index(px.ravel(), py.ravel())
            hit = vi >= 0
            if not hit.any():
                continue
            rep = np.repeat(rows[sel], 2 * mi)
            tt = np.repeat(t[sel], 2 * mi)
            np.minimum.at(flat, rep[hit] * V + vi[hit], tt[hit])
            if loop_mask_sink is not None:
                masks = np.zeros(g, dtype=np.uint64)
                lid = np.repeat(np.arange(g), 2 * mi)
                np.bitwise_or.at(masks, lid[hit],
                                 np.uint64(1) << vi[hit].astype(np.uint64))
                loop_mask_sink(rows[sel], t[sel], masks)

    # -- public sampling --------------------------------------------------

    def _batch_size(self, horizon: float) -> int:
        per_rep = max(self.cell_rate * horizon, 1.0)
        return int(min(REPLICA_BLOCK, max(16, _CELL_BUDGET // per_rep)))

    def cover_times_block(self, rng, n_replicas: int) -> np.ndarray:
        out = np.empty(n_replicas)
        done = 0
        bs = self._batch_size(self.horizon0)
        while done < n_replicas:
            b = min(bs, n_replicas - done)
            out[done:done + b] = self._cover_batch(rng, b)
            done += b
        return out

    def _cover_batch(self, rng, b: int) -> np.ndarray:
        V = self.target.size
        state = np.full((b, V), np.inf)
        times = np.full(b, np.nan)
        active = np.arange(b)
        t0, t1 = 0.0, self.horizon0
        for _ in range(_MAX_DOUBLINGS):
            sub = np.full((len(active), V), np.inf)
            sub[:] = state[active]
            rows, delta, x, y, m, t = self._draw_loops(rng, len(active), t0, t1)
            self._fold_coverage(rng, sub, rows, x, y, m, t)
            state[active] = sub
            worst = sub.max(axis=1)
            covered = np.isfinite(worst)
            times[active[covered]] = worst[covered]
            active = active[~covered]
            if len(active) == 0:
                return times
            t0, t1 = t1, 2.0 * t1
        raise ResourceCeilingError(
            f"target not covered within {_MAX_DOUBLINGS} horizon doublings")

    def ensemble(self, seed: int, replicas: int, workers: int = 1,
                 work_guard: float | None = None) -> CoverTimeSample:
        if replicas < 1:
            raise ValueError("replicas must be >= 1")
        est = self.cell_rate * self.horizon0 * replicas
        if work_guard is not None and est > work_guard:
            raise ResourceCeilingError(
                f"estimated work {est:.3g} exceeds guard {work_guard:.3g}")
        label = f"cover/{self.target.label}/{self.kappa:g}"
        blocks = [(i, min(REPLICA_BLOCK, replicas - i * REPLICA_BLOCK))
                  for i in range((replicas + REPLICA_BLOCK - 1) // REPLICA_BLOCK)]
        parts = run_blocks(_cover_block_job, [(self, label, seed, bi, bn)
                                              for bi, bn in blocks], workers)
        values = np.concatenate(parts)
        return CoverTimeSample(
            kappa=self.kappa, target_label=self.target.label,
            target_size=self.target.size, replicas=replicas,
            values=EmpiricalDistribution.from_samples(values),
            truncation_bias_rate=self.bias_rate, seed=seed, mu=self.mu,
            u_star=self.u_star)

    def fixed_horizon_events(self, seed: int, replicas: int, horizon: float,
                             workers: int = 1):
        """Per-replica first-cover times per vertex and first shared-loop
        time within a fixed horizon (inf when absent).  Shared-loop tracking
        supports targets with at most 60 vertices."""
        V = self.target.size
        if V > 60:
            raise ValueError("shared-loop tracking supports at most 60 vertices")
        label = f"events/{self.target.label}/{self.kappa:g}/{horizon:g}"
        blocks = [(i, min(REPLICA_BLOCK, replicas - i * REPLICA_BLOCK))
                  for i in range((replicas + REPLICA_BLOCK - 1) // REPLICA_BLOCK)]
        parts = run_blocks(_event_block_job,
                           [(self, label, seed, bi, bn, horizon)
                            for bi, bn in blocks], workers)
        cover = np.concatenate([p[0] for p in parts], axis=0)
        shared = np.concatenate([p[1] for p in parts])
        return cover, shared

    def _event_block(self, rng, b: int, horizon: float):
        V = self.target.size
        state = np.full((b, V), np.inf)
        shared = np.full(b, np.inf)
        full = np.uint64((1 << V) - 1)
        bs = self._batch_size(horizon)
        done = 0
        while done < b:
            nb = min(bs, b - done)
            rows, delta, x, y, m, t = self._draw_loops(rng, nb, 0.0, horizon)
            sub = state[done:done + nb]
            sh = np.full(nb, np.inf)

            def sub_sink(rows, t, masks, sh=sh):
                both = masks == full
                if both.any():
                    np.minimum.at(sh, rows[both], t[both])

            self._fold_coverage(rng, sub, rows, x, y, m, t,
                                loop_mask_sink=sub_sink if V > 1 else None)
            shared[done:done + nb] = sh
            done += nb
        return state, shared


def _cover_block_job(args):
    engine, label, seed, block_index, n = args
    rng = block_stream(seed, label, block_index)
    return engine.cover_times_block(rng, n)


def _event_block_job(args):
    engine, label, seed, block_index, n, horizon = args
    rng = block_stream(seed, label, block_index)
    return engine._event_block(rng, n, horizon)


def run_blocks(job, arg_list, workers: int = 1):
    """Run per-block jobs and merge by block index (worker-count invariant)."""
    if workers <= 1 or len(arg_list) <= 1:
        return [job(a) for a in arg_list]
    import concurrent.futures as cf
    with cf.ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(job, arg_list))


# ---------------------------------------------------------------------------
# Spec-level operations


def cover_time(rng: np.random.Generator, kappa: float, target,
               tail_tol: float = 1e-10) -> float:
    """One cover-time draw; target is a BoxTarget/PointsTarget or point list."""
    if not isinstance(target, (BoxTarget, PointsTarget)):
        target = PointsTarget(list(target))
    engine = CoverEngine(kappa, target, tail_tol)
    return float(engine._cover_batch(rng, 1)[0])


def first_cover_times_from_soup(soup, points: list[Point]) -> np.ndarray:
    """Per-point first cover times under an explicit soup (inf if missed).

    Loops are decoded in half-length groups so the pathwise route stays
    usable as an oracle at thousands of loops.
    """
    target = PointsTarget(points)
    best = np.full(len(points), np.inf)
    hl = np.asarray(soup.half_length)
    for m in np.unique(hl).tolist():
        idx = np.nonzero(hl == m)[0]
        nbytes = (2 * m + 3) // 4
        buf = b"".join(soup.steps_packed[i] for i in idx)
        raw = np.frombuffer(buf, dtype=np.uint8).reshape(len(idx), nbytes)
        codes = np.empty((len(idx), nbytes * 4), dtype=np.int64)
        for k in range(4):
            codes[:, k::4] = (raw >> (2 * k)) & 3
        codes = codes[:, :2 * m]
        from .lattice import STEP_DX, STEP_DY
        px = np.empty_like(codes)
        py = np.empty_like(codes)
        px[:, 0] = soup.root_x[idx]
        py[:, 0] = soup.root_y[idx]
        px[:, 1:] = soup.root_x[idx, None] + np.cumsum(STEP_DX[codes], axis=1)[:, :-1]
        py[:, 1:] = soup.root_y[idx, None] + np.cumsum(STEP_DY[codes], axis=1)[:, :-1]
        vi = target.vertex_index(px.ravel(), py.ravel())
        hit = vi >= 0
        if hit.any():
            tt = np.repeat(soup.timestamp[idx], 2 * m)
            np.minimum.at(best, vi[hit], tt[hit])
    return best


def cover_time_from_soup(soup, points: list[Point]) -> float:
    """Cover time of `points` under an explicitly sampled soup (pathwise)."""
    best = first_cover_times_from_soup(soup, points)
    worst = float(best.max())
    if not math.isfinite(worst):
        raise ValueError("soup horizon does not cover the target")
    return worst


def cover_time_ensemble(seed: int, kappa: float, target, replicas: int,
                        tail_tol: float = 1e-10, workers: int = 1,
                        work_guard: float | None = None) -> CoverTimeSample:
    if not isinstance(target, (BoxTarget, PointsTarget)):
        target = PointsTarget(list(target))
    engine = CoverEngine(kappa, target, tail_tol)
    return engine.ensemble(seed, replicas, workers, work_guard)


# ---------------------------------------------------------------------------
# Example experiments and scans


def _trend_verdict(check: str, params: str, distances: list[float],
                   allowance: float, hypotheses_met: bool = True) -> Verdict:
    worst = max(b - a for a, b in zip(distances, distances[1:])) \
        if len(distances) > 1 else 0.0
    ok = worst <= allowance
    verdict = (VERDICT_HOLDS if ok else VERDICT_FAILS) if hypotheses_met \
        else VERDICT_NOT_MET
    gap = abs(allowance - worst)
    return Verdict(check=check, anchor="trend", params=params, lhs=worst,
                   rhs=allowance, verdict=verdict, margin=gap if ok else -gap)


@dataclass
class ExampleReport:
    label: str
    kappa: float
    verdicts: list[Verdict]
    ensembles: dict[str, CoverTimeSample]
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(v.verdict != VERDICT_FAILS for v in self.verdicts)


def run_example_two_far(kappa: float, separation: int, replicas: int,
                        seed: int = 1, workers: int = 1,
                        tail_tol: float = 1e-10) -> ExampleReport:
    """Two points at separation >= 10 kappa^-2: rescaled cover time vs the
    square of the one-point law, with the analytic decoupling gap reported."""
    if separation % 2 or separation < 10.0 / kappa ** 2:
        raise ValueError("separation must be even and >= 10 kappa^-2")
    return run_example_many_sep(kappa, 2, separation, replicas, seed,
                                workers, tail_tol)


def analytic_two_point_gap(kappa: float, u: float, mu: float) -> float:
    """Decoupling gap bound 32 u e^{-2u} e^{-2/kappa} / mu at rescaled time u."""
    return 32.0 * u * math.exp(-2.0 * u) * math.exp(-2.0 / kappa) / mu


def run_example_many_sep(kappa: float, count: int, separation: int,
                         replicas: int, seed: int = 1, workers: int = 1,
                         tail_tol: float = 1e-10) -> ExampleReport:
    """k points on a line, pairwise separation >= 10 kappa^-2: the rescaled
    cover time tracks the maximum of k independent unit exponentials."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if count > 1 and (separation % 2 or separation < 10.0 / kappa ** 2):
        raise ValueError("separation must be even and >= 10 kappa^-2")
    target = PointsTarget([(i * separation, 0) for i in range(count)])
    sample = cover_time_ensemble(seed, kappa, target, replicas,
                                 tail_tol=tail_tol, workers=workers)
    scaled = sample.scaled()
    d = ks_distance(scaled, exp1_power_cdf(count))
    thr = calibrated_ks_threshold(replicas)
    qs = np.quantile(scaled.values, [0.25, 0.5, 0.75, 0.9])
    gap = max(analytic_two_point_gap(kappa, float(u), sample.mu) for u in qs)
    gap_budget = gap * count * count
    bias = sample.truncation_bias_bound
    ok = d <= thr + gap_budget + bias
    verdicts = [Verdict(
        check=f"cover-max-of-{count}-exponentials", anchor="separated-points-law",
        params=f"kappa={kappa:g},sep={separation},replicas={replicas}",
        lhs=d, rhs=thr + gap_budget + bias,
        verdict=VERDICT_HOLDS if ok else VERDICT_FAILS,
        margin=(thr + gap_budget + bias - d) if ok else -(d - thr - gap_budget - bias))]
    return ExampleReport(label=f"line:{count}x{separation}", kappa=kappa,
                         verdicts=verdicts, ensembles={"cover": sample},
                         details={"ks": d, "threshold": thr,
                                  "analytic_gap": gap_budget,
                                  "truncation_bias": bias})


def run_example_neighbors(kappa_grid, replicas: int, seed: int = 1,
                          workers: int = 1,
                          tail_tol: float = 1e-10) -> ExampleReport:
    """Diagonal-neighbor pair {o, (1,1)}: the rescaled cover time approaches
    a single unit exponential as kappa decreases; asserted as a trend."""
    distances = []
    ensembles = {}
    for kappa in kappa_grid:
        target = PointsTarget([(0, 0), (1, 1)])
        sample = cover_time_ensemble(seed, kappa, target, replicas,
                                     tail_tol=tail_tol, workers=workers)
        distances.append(ks_distance(sample.scaled(), exp1_cdf))
        ensembles[f"kappa={kappa:g}"] = sample
    thr = calibrated_ks_threshold(replicas)
    verdicts = [_trend_verdict("neighbor-pair-single-exponential-trend",
                               f"kappas={list(kappa_grid)},replicas={replicas}",
                               distances, 2.0 * thr)]
    return ExampleReport(label="neighbors", kappa=float(kappa_grid[-1]),
                         verdicts=verdicts, ensembles=ensembles,
                         details={"ks": distances, "threshold": thr})


def run_gumbel_scan(kappa: float, box_sides, replicas: int, seed: int = 1,
                    workers: int = 1, tail_tol: float = 1e-10,
                    work_guard: float = 5e11) -> ExampleReport:
    """Boxes of growing side: KS distance of mu*T - log|A| to exp(-e^{-z}).

    The limit theorem's regime log(1/kappa) >= e^32 is numerically
    unreachable; this scan asserts only that the distance is nonincreasing
    in the box side within calibrated noise, and prints the theorem's rate
    bound for context.
    """
    distances = []
    ensembles = {}
    details = {}
    for side in box_sides:
        target = BoxTarget(side)
        engine = CoverEngine(kappa, target, tail_tol)
        sample = engine.ensemble(seed, replicas, workers, work_guard)
        z = sample.mu * sample.values.values - math.log(target.size)
        distances.append(ks_distance(EmpiricalDistribution.from_samples(z),
                                     gumbel_cdf_vec))
        ensembles[f"box={side}"] = sample
        details[f"rate_bound_box={side}"] = \
            12.0 * target.size ** (-1.0 / (800.0 * sample.mu))
    thr = calibrated_ks_threshold(replicas)
    verdicts = [
        Verdict(check="gumbel-regime-hypothesis", anchor="gumbel-limit",
                params=f"kappa={kappa:g}", lhs=math.log(1.0 / kappa),
                rhs=math.exp(32), verdict=VERDICT_NOT_MET,
                margin=-abs(math.exp(32) - math.log(1.0 / kappa))),
        _trend_verdict("gumbel-distance-trend",
                       f"kappa={kappa:g},boxes={list(box_sides)},replicas={replicas}",
                       distances, 2.0 * thr),
    ]
    return ExampleReport(label="gumbel-scan", kappa=kappa, verdicts=verdicts,
                         ensembles=ensembles,
                         details={"ks": distances, "threshold": thr, **details})
