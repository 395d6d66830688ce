"""Blocked evaluation of the even-walk power series with certified tails.

Everything the Green's engine needs reduces to sums over half-lengths m of

    t_m * f_a(m) * f_b(m),   t_m = beta^{2m} C(2m, m)^2,
    f_a(m) = C(2m, m+a) / C(2m, m) = prod_{i<=a} (m-i+1)/(m+i),

with beta = 1/(4+kappa).  The per-block anchor t at the block head is taken
in log space (log-gamma), the rest of the block by a cumulative product of
exact one-step ratios, so rounding drift never accumulates across blocks.

Truncation never relies on convergence heuristics: the even series tail
beyond half-length N obeys sum_{m>N} t_m <= 4 exp(-N kappa / 4) whenever
N kappa >= 1/2, and f_a f_b <= 1 extends the same bound to every target
point.  A sum stops at the first block end where that bound meets the
requested relative tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

#: Hard ceiling on summed half-lengths; beyond this the certified tail bound
#: cannot be brought under tolerance in reasonable time and callers must fall
#: back to the two-sided enclosures.
DEFAULT_M_CEILING = 1 << 28

_FIRST_BLOCK = 1 << 12
# Blocks stay L3-resident: the kernel is memory-bound and larger blocks
# spill cache and run ~4x slower.
_MAX_BLOCK = 1 << 20


class SeriesTruncationError(RuntimeError):
    """Certified tail bound cannot reach the tolerance within the ceiling."""


def step_weight(kappa: float) -> float:
    """beta = 1/(4+kappa); 4*beta < 1 makes every series here convergent."""
    if kappa <= 0:
        raise ValueError("killing rate kappa must be > 0")
    return 1.0 / (4.0 + kappa)


def exp_tail_bound(kappa: float, m: int) -> float:
    """Bound on sum_{j>m} beta^{2j} C(2j,j)^2, valid when m*kappa >= 1/2."""
    return 4.0 * math.exp(-m * kappa / 4.0)


def log_loop_term(kappa: float, m: np.ndarray) -> np.ndarray:
    """log t_m = 2m log beta + 2[lgamma(2m+1) - 2 lgamma(m+1)]."""
    beta = step_weight(kappa)
    m = np.asarray(m, dtype=np.float64)
    return 2.0 * m * math.log(beta) + 2.0 * (gammaln(2 * m + 1) - 2 * gammaln(m + 1))


def _block_terms(kappa: float, m0: int, m1: int) -> tuple[np.ndarray, np.ndarray]:
    """t_m for m in [m0, m1): log-anchored head, exact ratio cumprod after."""
    beta = step_weight(kappa)
    q = (4.0 * beta) ** 2
    m = np.arange(m0, m1, dtype=np.float64)
    r = np.empty(m1 - m0)
    r[0] = math.exp(float(log_loop_term(kappa, np.array([m0]))[0]))
    if m1 - m0 > 1:
        r[1:] = q * (1.0 - 0.5 / m[1:]) ** 2
    return np.cumprod(r), m


@dataclass
class GramResult:
    """Sums S[a, b] = sum_{m>=1} t_m f_a(m) f_b(m) with a certified tail.

    ``tail_bound`` bounds the omitted remainder of S[0, 0]; by monotonicity
    (f <= 1) it also bounds the remainder of every other entry.
    """

    kappa: float
    a_max: int
    gram: np.ndarray
    m_trunc: int
    tail_bound: float
    rel_tol: float


def loop_series_gram(kappa: float, a_max: int, rel_tol: float,
                     m_ceiling: int = DEFAULT_M_CEILING) -> GramResult:
    """Evaluate all S[a, b] for 0 <= a, b <= a_max in one blocked pass.

    Works on sqrt-weighted rows Fw[a] = f_a * sqrt(t) so each block reduces
    to one small symmetric matrix product; all scratch is reused in place to
    keep the kernel cache-resident.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be > 0")
    beta = step_weight(kappa)
    q = (4.0 * beta) ** 2
    gram = np.zeros((a_max + 1, a_max + 1))
    m0 = 1
    block = _FIRST_BLOCK
    ws_size = -1
    while True:
        m1 = min(m0 + block, m_ceiling + 1)
        n = m1 - m0
        if n != ws_size:
            m = np.empty(n)
            r = np.empty(n)
            num = np.empty(n)
            den = np.empty(n)
            Fw = np.empty((a_max + 1, n))
            ws_size = n
        m[:] = np.arange(m0, m1, dtype=np.float64)
        np.divide(-0.5, m, out=r)
        np.add(r, 1.0, out=r)
        np.square(r, out=r)
        np.multiply(r, q, out=r)
        r[0] = math.exp(float(log_loop_term(kappa, np.array([float(m0)]))[0]))
        np.cumprod(r, out=r)  # r = t_m over the block (log anchor at m0)
        np.sqrt(r, out=Fw[0])
        for a in range(1, a_max + 1):
            # (m - a + 1) hits zero at m = a - 1 and the product stays zero
            # for all smaller m, which is exactly f_a(m) = 0 for m < a.
            np.subtract(m, a - 1.0, out=num)
            np.add(m, float(a), out=den)
            np.divide(num, den, out=num)
            np.multiply(Fw[a - 1], num, out=Fw[a])
        gram += Fw @ Fw.T
        m_last = m1 - 1
        tail = exp_tail_bound(kappa, m_last)
        if m_last * kappa >= 0.5 and tail <= rel_tol * (1.0 + gram[0, 0]):
            return GramResult(kappa=kappa, a_max=a_max, gram=gram,
                              m_trunc=m_last, tail_bound=tail, rel_tol=rel_tol)
        if m1 > m_ceiling:
            raise SeriesTruncationError(
                f"tail bound not certified below rel_tol={rel_tol:g} within "
                f"{m_ceiling} half-lengths at kappa={kappa:g}")
        m0 = m1
        block = min(block * 2, _MAX_BLOCK)


def loop_weight_series(kappa: float, rel_tol: float,
                       m_ceiling: int = DEFAULT_M_CEILING) -> tuple[float, int, float]:
    """sum_{m>=1} t_m / (2m): the per-vertex rooted loop intensity.

    Returns (value, m_trunc, tail_bound); the tail of the weighted series is
    the unweighted bound divided by 2(m_trunc + 1).
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be > 0")
    total = 0.0
    comp = 0.0  # Neumaier carry across blocks
    m0 = 1
    block = _FIRST_BLOCK
    while True:
        m1 = min(m0 + block, m_ceiling + 1)
        t, m = _block_terms(kappa, m0, m1)
        part = float(np.sum(t / (2.0 * m)))
        s = total + part
        if abs(total) >= abs(part):
            comp += (total - s) + part
        else:
            comp += (part - s) + total
        total = s
        m_last = m1 - 1
        tail = exp_tail_bound(kappa, m_last) / (2.0 * (m_last + 1))
        if m_last * kappa >= 0.5 and tail <= rel_tol * (total + comp):
            return total + comp, m_last, tail
        if m1 > m_ceiling:
            raise SeriesTruncationError(
                f"rooted intensity tail not certified at kappa={kappa:g}")
        m0 = m1
        block = min(block * 2, _MAX_BLOCK)


def loop_term_array(kappa: float, m_max: int) -> np.ndarray:
    """t_m for m = 1..m_max as a dense array (moderate m_max only)."""
    t, _ = _block_terms(kappa, 1, m_max + 1)
    return t
