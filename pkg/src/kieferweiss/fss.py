"""Fixed-sample-size baseline.

By monotone likelihood ratio the most powerful level-``alpha`` test based on
``n`` observations rejects H0 for large ``S_n``, randomizing at the critical
value so that its size is exactly ``alpha``.  The fractional sample size
interpolates linearly between the last ``n`` whose type II error is still at
least ``beta`` and the next one.
"""
from __future__ import annotations

from dataclasses import dataclass
import math
import warnings

from .expfam import FamilyModel

__all__ = ["NpTest", "np_test", "np_beta", "fss", "fss_bracket", "efficiency_ratios"]


@dataclass(frozen=True)
class NpTest:
    n: int
    critical: int  # reject for S_n > critical, randomize at S_n == critical
    gamma: float

    def size(self, model: FamilyModel, theta0: float) -> float:
        d = model.dist(model.natural(theta0), self.n)
        return float(d.sf(self.critical) + self.gamma * d.pmf(self.critical))


def np_test(model: FamilyModel, theta0: float, alpha: float, n: int) -> NpTest:
    """Randomized most powerful test of exact size ``alpha`` with ``n`` observations."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    d = model.dist(model.natural(theta0), n)
    c = int(d.isf(alpha))
    while d.sf(c) > alpha:
        c += 1
    while c > 0 and d.sf(c - 1) <= alpha:
        c -= 1
    p = d.pmf(c)
    gamma = (alpha - d.sf(c)) / p if p > 0 else 0.0
    return NpTest(n, c, float(min(max(gamma, 0.0), 1.0)))


def np_beta(model: FamilyModel, theta0: float, theta1: float, alpha: float, n: int) -> float:
    """Type II error of the most powerful size-``alpha`` test with ``n`` observations.

    ``n = 0`` gives the data-free randomized test, ``beta = 1 - alpha``.
    """
    if n == 0:
        return 1.0 - alpha
    t = np_test(model, theta0, alpha, n)
    d1 = model.dist(model.natural(theta1), n)
    return float(d1.cdf(t.critical - 1) + (1.0 - t.gamma) * d1.pmf(t.critical))


def fss_bracket(model: FamilyModel, theta0: float, theta1: float, alpha: float, beta: float) -> int:
    """Largest ``n`` with ``np_beta(n) >= beta`` (0 when even one observation is enough)."""
    def b(n):
        return np_beta(model, theta0, theta1, alpha, n)

    if b(1) < beta:
        return 0
    lo, hi = 1, 2
    while b(hi) >= beta:
        lo, hi = hi, 2 * hi
    # b(lo) >= beta > b(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if b(mid) >= beta:
            lo = mid
        else:
            hi = mid
    return lo


def fss(model: FamilyModel, theta0: float, theta1: float, alpha: float, beta: float) -> float:
    """Fractional sample size of the most powerful test with error probabilities ``alpha, beta``."""
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("alpha and beta must lie in (0, 1)")
    n = fss_bracket(model, theta0, theta1, alpha, beta)
    if n == 0:
        warnings.warn("a single observation already achieves beta; FSS is below 1", RuntimeWarning, stacklevel=2)
    b0 = np_beta(model, theta0, theta1, alpha, n)
    b1 = np_beta(model, theta0, theta1, alpha, n + 1)
    return n + (b0 - beta) / (b0 - b1)


def efficiency_ratios(fss_value: float, asn_theta: float, asn_theta0: float, asn_theta1: float,
                      quantile_99: float) -> dict:
    """Ratios of the fixed sample size to ASNs and to the 0.99 quantile."""
    return {
        "R": fss_value / asn_theta,
        "R0": fss_value / asn_theta0,
        "R1": fss_value / asn_theta1,
        "QR": fss_value / quantile_99,
    }


def ratios_from_reports(fss_value: float, reports: dict) -> dict:
    """:func:`efficiency_ratios` from reports keyed ``theta``, ``theta0``, ``theta1``."""
    return efficiency_ratios(fss_value, reports["theta"].asn, reports["theta0"].asn, reports["theta1"].asn,
                             reports["theta"].quantile_99)
