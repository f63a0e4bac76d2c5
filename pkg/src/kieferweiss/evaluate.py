"""Exact performance of truncated sequential plans on the sufficient statistic.

A plan stops at stage ``n`` unless ``S_n`` lies in the continuation interval
``[lower[n-1], upper[n-1]]``; on stopping it accepts H0 iff
``S_n <= thresholds[n-1]``.  Stage ``H`` always stops.

All quantities are obtained from backward recursions over ``(n, s)`` that
only touch the continuation intervals.  Outside an interval the next-stage
function is either zero or an indicator of ``s <= T``, and its expectation is
read off the tabulated cdf of one observation.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
import json
import math

import numpy as np

from .expfam import FamilyModel, ObsTable

__all__ = [
    "EvalPlan",
    "PerformanceReport",
    "oc",
    "reject_probability",
    "tail_probability",
    "survival",
    "asn",
    "quantile",
    "asn_curve",
    "performance",
    "golden_max",
]


@dataclass(eq=False)
class EvalPlan:
    """Per-stage continuation intervals and accept-H0 thresholds.

    ``lower``/``upper`` have length ``horizon - 1``; an empty stage has
    ``lower > upper``.  ``thresholds`` has length ``horizon``.
    """

    horizon: int
    lower: np.ndarray
    upper: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=np.int64)
        self.upper = np.asarray(self.upper, dtype=np.int64)
        self.thresholds = np.asarray(self.thresholds, dtype=np.int64)
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if len(self.lower) != self.horizon - 1 or len(self.upper) != self.horizon - 1:
            raise ValueError("need one continuation interval per stage 1..H-1")
        if len(self.thresholds) != self.horizon:
            raise ValueError("need one accept threshold per stage 1..H")
        # negative states are never reached
        self.lower = np.maximum(self.lower, 0)

    @classmethod
    def always_stop(cls, threshold: int = 0) -> "EvalPlan":
        return cls(1, [], [], [threshold])

    def interval(self, n: int) -> np.ndarray:
        """States at which stage ``n`` continues (empty at stage H)."""
        if n >= self.horizon:
            return np.empty(0, dtype=np.int64)
        lo, hi = self.lower[n - 1], self.upper[n - 1]
        return np.arange(lo, hi + 1) if hi >= lo else np.empty(0, dtype=np.int64)

    def continues(self, n: int, s) -> np.ndarray:
        if n >= self.horizon:
            return np.zeros(np.shape(s), dtype=bool)
        s = np.asarray(s)
        return (s >= self.lower[n - 1]) & (s <= self.upper[n - 1])

    def accepts_h0(self, n: int, s) -> np.ndarray:
        return np.asarray(s) <= self.thresholds[n - 1]

    def reachable_horizon(self, model: FamilyModel) -> int:
        """Largest stage reached with positive probability.

        Uses only the supports, so it does not depend on the parameter.
        """
        step_max = model.support_max
        lo, hi = 0, step_max  # states of S_1
        for n in range(1, self.horizon):
            a, b = self.lower[n - 1], self.upper[n - 1]
            lo, hi = max(lo, a), min(hi, b)
            if lo > hi:
                return n
            lo, hi = lo, hi + step_max
        return self.horizon


@dataclass
class PerformanceReport:
    theta: float
    oc: float
    alpha: float
    beta: float
    asn: float
    tail: dict = field(default_factory=dict)
    quantile_99: int = 1
    max_n: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tail"] = {str(k): v for k, v in self.tail.items()}
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _table(model, theta_user, table=None) -> ObsTable:
    if table is not None:
        return table
    return model.obs_table(model.natural(theta_user))


def _stages(plan: EvalPlan):
    """Continuation bounds and thresholds as plain Python ints, for the stage loops."""
    return plan.lower.tolist(), plan.upper.tolist(), plan.thresholds.tolist()


def _expect_step(tab: ObsTable, states: np.ndarray, nxt: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """``sum_y vals[y] f(y - s)`` over ``y`` in ``nxt`` for each ``s`` in ``states``."""
    if len(states) == 0 or len(nxt) == 0:
        return np.zeros(len(states))
    return tab.kernel(states, nxt) @ vals


def _accept_prob(plan: EvalPlan, model: FamilyModel, theta_user: float, accept_h0: bool, table=None) -> float:
    tab = _table(model, theta_user, table)
    lower, upper, thr = _stages(plan)
    tail = tab.cdf_at if accept_h0 else tab.sf_at

    # a_{n+1} on the interval [nlo, nlo + len(vals)) of stage n+1, from n = H - 1 down
    vals, nlo = None, 0
    for n in range(plan.horizon - 1, 0, -1):
        lo, hi = lower[n - 1], upper[n - 1]
        if hi < lo:
            vals = None
            continue
        width = hi - lo + 1
        # mass of stopping at n+1 with the wanted decision, ignoring the interval of n+1
        out = tail(thr[n] - lo - np.arange(width))
        if vals is not None:
            accept_next = np.arange(len(vals)) <= thr[n] - nlo
            corr = vals - (accept_next if accept_h0 else ~accept_next)
            out = out + tab.band(nlo - lo, width, len(vals)) @ corr
        vals, nlo = out, lo
    base = float(tail(thr[0]))
    if vals is None:
        return base
    accept_next = np.arange(len(vals)) <= thr[0] - nlo
    corr = vals - (accept_next if accept_h0 else ~accept_next)
    return base + float(tab.band(nlo, 1, len(vals))[0] @ corr)


def oc(plan: EvalPlan, model: FamilyModel, theta_user: float, table: ObsTable | None = None) -> float:
    """Probability of accepting H0 at ``theta_user``."""
    return _accept_prob(plan, model, theta_user, True, table)


def reject_probability(plan: EvalPlan, model: FamilyModel, theta_user: float, table=None) -> float:
    """Probability of accepting H1, from the complementary recursion."""
    return _accept_prob(plan, model, theta_user, False, table)


def _backward_sum(plan: EvalPlan, tab: ObsTable, last: int, add: float) -> float:
    """Backward pass ``v_n = add + E v_{n+1}`` over stages ``last .. 1`` with ``v_last = 1`` on its interval."""
    lower, upper, _ = _stages(plan)
    vals, nlo = None, 0
    for n in range(last, 0, -1):
        lo, hi = lower[n - 1], upper[n - 1]
        if hi < lo:
            vals = None
            continue
        width = hi - lo + 1
        if n == last:
            out = np.ones(width)
        elif vals is None:
            out = np.full(width, add)
        else:
            out = add + tab.band(nlo - lo, width, len(vals)) @ vals
        vals, nlo = out, lo
    if vals is None:
        return 0.0
    return float(tab.band(nlo, 1, len(vals))[0] @ vals)


def tail_probability(plan: EvalPlan, model: FamilyModel, theta_user: float, k: int, table=None) -> float:
    """``P(tau > k)`` by the backward recursion over stages ``k, k-1, ..., 1``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= plan.horizon:
        return 0.0
    return _backward_sum(plan, _table(model, theta_user, table), k, 0.0)


def asn(plan: EvalPlan, model: FamilyModel, theta_user: float, table=None) -> float:
    """Average sample number of the plan at ``theta_user``."""
    if plan.horizon == 1:
        return 1.0
    tab = _table(model, theta_user, table)
    return 1.0 + _backward_sum(plan, tab, plan.horizon - 1, 1.0)


def survival(plan: EvalPlan, model: FamilyModel, theta_user: float, table=None) -> np.ndarray:
    """``P(tau > k)`` for ``k = 0 .. H`` by propagating the sub-distribution of ``S_k`` forward."""
    tab = _table(model, theta_user, table)
    lower, upper, _ = _stages(plan)
    H = plan.horizon
    out = np.zeros(H + 1)
    out[0] = 1.0
    mass, plo = np.ones(1), 0
    for k in range(1, H):
        lo, hi = lower[k - 1], upper[k - 1]
        if hi < lo or not len(mass):
            break
        mass = mass @ tab.band(lo - plo, len(mass), hi - lo + 1)
        plo = lo
        out[k] = mass.sum()
    return out


def quantile(plan: EvalPlan, model: FamilyModel, theta_user: float, level: float = 0.99, table=None,
             surv: np.ndarray | None = None) -> int:
    """Smallest ``k`` with ``P(tau <= k) >= level``."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if surv is None:
        surv = survival(plan, model, theta_user, table)
    hit = np.nonzero(1.0 - surv >= level)[0]
    return int(hit[0]) if len(hit) else plan.horizon


def performance(plan: EvalPlan, model: FamilyModel, theta_user: float, theta0: float, theta1: float,
                level: float = 0.99, tail_ks=()) -> PerformanceReport:
    """Collect OC, error probabilities, ASN, tails and the quantile at one parameter."""
    tab = _table(model, theta_user)
    surv = survival(plan, model, theta_user, tab)
    return PerformanceReport(
        theta=theta_user,
        oc=oc(plan, model, theta_user, tab),
        alpha=reject_probability(plan, model, theta0),
        beta=oc(plan, model, theta1),
        asn=asn(plan, model, theta_user, tab),
        tail={int(k): float(surv[k]) if k <= plan.horizon else 0.0 for k in tail_ks},
        quantile_99=quantile(plan, model, theta_user, level, surv=surv),
        max_n=plan.reachable_horizon(model),
    )


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(fun, lo: float, hi: float, tol: float = 1e-6):
    """Golden-section search for the maximum of a unimodal ``fun`` on ``[lo, hi]``."""
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = fun(c), fun(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = fun(d)
    return (c, fc) if fc >= fd else (d, fd)


def asn_curve(plan: EvalPlan, model: FamilyModel, grid, tol: float = 1e-6):
    """ASN over ``grid`` plus a golden-section refinement of its maximizer.

    Returns ``(points, argsup, sup)`` where ``points`` is a list of
    ``(theta, asn)`` pairs on the grid.
    """
    grid = np.asarray(sorted(grid), dtype=float)
    vals = np.array([asn(plan, model, t) for t in grid])
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    best_t, best_v = grid[i], vals[i]
    if hi > lo:
        t, v = golden_max(lambda t: asn(plan, model, t), lo, hi, tol)
        if v > best_v:
            best_t, best_v = t, v
    return list(zip(grid.tolist(), vals.tolist())), float(best_t), float(best_v)


def default_grid(model: FamilyModel, theta0: float, theta1: float, points: int = 21) -> np.ndarray:
    """Grid covering the hypotheses plus half their distance on each side."""
    w = theta1 - theta0
    lo, hi = theta0 - 0.5 * w, theta1 + 0.5 * w
    lo = max(lo, theta0 / 2.0)
    if model.kind == "binomial":
        hi = min(hi, (1.0 + theta1) / 2.0)
    return np.linspace(lo, hi, points)
