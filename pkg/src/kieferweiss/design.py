"""Backward induction for the modified Kiefer-Weiss problem.

For fixed multipliers ``lambda0, lambda1`` and a parameter ``theta`` the
plan minimizing ``N(theta) + lambda0*alpha + lambda1*beta`` depends on the
data only through ``(n, S_n)``.  The recursion is carried out on the value
function divided by ``g_theta^n(s)``; in that scale the one-step operator is
a plain expectation ``E_theta u(s + X)`` and the stopping costs are the
weighted likelihood ratios ``lambda_i * g_i^n(s) / g_theta^n(s)``.

Only the deviation of the value function from the stopping cost is stored,
on the continuation interval of each stage; the expectation of the stopping
cost itself has a closed form in terms of the cdf of one observation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import math
import warnings

import numpy as np

from .evaluate import EvalPlan
from .expfam import FamilyModel, family_from_name

__all__ = [
    "DesignProblem",
    "TestPlan",
    "ResourceError",
    "bound_upper",
    "bound_lower",
    "horizon_bound",
    "accept_threshold",
    "design_modified",
    "design_truncated",
    "design",
]

# largest (candidate states) x (next-stage interval) block built per stage
MAX_CELLS = 50_000_000


class ResourceError(MemoryError):
    """Per-stage state range too large to process."""


@dataclass(frozen=True)
class DesignProblem:
    model: FamilyModel
    theta0: float
    theta1: float
    theta: float
    lambda0: float
    lambda1: float
    penalty_c: float = 0.0
    horizon_cap: int | str = "auto"

    def __post_init__(self):
        for t in (self.theta0, self.theta1, self.theta):
            self.model.check_user(t)
        if not self.theta0 < self.theta1:
            raise ValueError("theta0 must be smaller than theta1")
        if not (self.lambda0 > 0 and self.lambda1 > 0):
            raise ValueError("Lagrange multipliers must be positive")
        if self.penalty_c < 0:
            raise ValueError("penalty_c must be non-negative")
        if self.horizon_cap != "auto" and int(self.horizon_cap) < 1:
            raise ValueError("horizon_cap must be a positive integer or 'auto'")

    # natural-scale quantities used throughout
    @property
    def nat(self):
        m = self.model
        t0, t1, t = m.natural(self.theta0), m.natural(self.theta1), m.natural(self.theta)
        return t0, t1, t, m.b(t0), m.b(t1), m.b(t)

    @property
    def interior(self) -> bool:
        return self.theta0 < self.theta < self.theta1


def bound_upper(problem: DesignProblem, n: int) -> int:
    """Largest ``s`` at which stage ``n`` may continue, from ``lambda0``."""
    t0, _, t, b0, _, b = problem.nat
    if not t > t0:
        raise ValueError("upper bound needs theta > theta0")
    return math.floor((math.log(problem.lambda0) + n * (b - b0)) / (t - t0))


def bound_lower(problem: DesignProblem, n: int) -> int:
    """Smallest ``s`` at which stage ``n`` may continue, from ``lambda1``."""
    _, t1, t, _, b1, b = problem.nat
    if not t < t1:
        raise ValueError("lower bound needs theta < theta1")
    return max(0, math.ceil((-math.log(problem.lambda1) + n * (b1 - b)) / (t1 - t)))


def horizon_bound(problem: DesignProblem) -> int:
    """Last stage at which continuation can pay off when theta0 < theta < theta1."""
    if not problem.interior:
        raise ValueError("no finite horizon bound unless theta0 < theta < theta1; pass horizon_cap")
    t0, t1, t, b0, b1, b = problem.nat
    num = math.log(problem.lambda0) / (t - t0) + math.log(problem.lambda1) / (t1 - t)
    den = (b1 - b) / (t1 - t) - (b - b0) / (t - t0)
    return max(0, math.floor(num / den))


def accept_threshold(problem: DesignProblem, n: int) -> int:
    """Accept H0 on stopping at stage ``n`` iff ``S_n`` is at most this value."""
    t0, t1, _, b0, b1, _ = problem.nat
    return math.floor((math.log(problem.lambda0 / problem.lambda1) + n * (b1 - b0)) / (t1 - t0))


@dataclass(eq=False)
class TestPlan(EvalPlan):
    """An optimal truncated plan together with the instance that produced it."""

    problem: DesignProblem | None = None
    lagrangian_value: float = math.nan
    possibly_suboptimal: bool = False
    stop_after_first: bool = False

    def to_dict(self) -> dict:
        p = self.problem
        stages = []
        for n in range(1, self.horizon):
            lo, hi = int(self.lower[n - 1]), int(self.upper[n - 1])
            stages.append({"n": n, "a": lo, "b": hi} if hi >= lo else {"n": n, "a": None, "b": None})
        return {
            "family": p.model.kind,
            "family_params": p.model.params,
            "theta0": p.theta0,
            "theta1": p.theta1,
            "theta": p.theta,
            "lambda0": p.lambda0,
            "lambda1": p.lambda1,
            "penalty_c": p.penalty_c,
            "horizon": int(self.horizon),
            "stages": stages,
            "accept_thresholds": [int(v) for v in self.thresholds],
            "lagrangian_value": self.lagrangian_value,
            "possibly_suboptimal": self.possibly_suboptimal,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "TestPlan":
        params = d.get("family_params", {})
        model = family_from_name(d["family"], m=params.get("m"), r=params.get("r"))
        problem = DesignProblem(model, d["theta0"], d["theta1"], d["theta"], d["lambda0"], d["lambda1"],
                                d.get("penalty_c", 0.0))
        H = int(d["horizon"])
        lower = np.ones(H - 1, dtype=np.int64)
        upper = np.zeros(H - 1, dtype=np.int64)
        for st in d["stages"]:
            if st["a"] is not None:
                lower[st["n"] - 1], upper[st["n"] - 1] = st["a"], st["b"]
        return cls(H, lower, upper, d["accept_thresholds"], problem=problem,
                   lagrangian_value=d.get("lagrangian_value", math.nan),
                   possibly_suboptimal=d.get("possibly_suboptimal", False))

    @classmethod
    def from_json(cls, text: str) -> "TestPlan":
        return cls.from_dict(json.loads(text))


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _induct(problem: DesignProblem, start: int) -> TestPlan:
    """Backward induction with stopping forced at stage ``start``."""
    model = problem.model
    t0, t1, t, b0, b1, b = problem.nat
    ll0, ll1 = math.log(problem.lambda0), math.log(problem.lambda1)
    c = problem.penalty_c
    tab = model.obs_table(t)
    tab0 = model.obs_table(t0)
    tab1 = model.obs_table(t1)
    log_cdf1 = _log(tab1.cdf)
    log_sf0 = _log(tab0.sf)

    def thr(n):
        return math.floor((ll0 - ll1 + n * (b1 - b0)) / (t1 - t0))

    def log_stops(n, s):
        return ll0 + (t0 - t) * s - n * (b0 - b), ll1 + (t1 - t) * s - n * (b1 - b)

    def expected_stop(n, s, T_next):
        # E_theta[stopping cost at n+1 from s + X] in closed form
        k = T_next - s
        kc = np.clip(k, 0, tab1.xmax)
        lc1 = np.where(k < 0, -np.inf, np.where(k > tab1.xmax, 0.0, log_cdf1[kc]))
        ks = np.clip(k, 0, tab0.xmax)
        ls0 = np.where(k < 0, 0.0, np.where(k > tab0.xmax, -np.inf, log_sf0[ks]))
        g0, g1 = log_stops(n, s)
        return np.exp(g1 + lc1) + np.exp(g0 + ls0)

    H = start
    lower = np.ones(max(start - 1, 0), dtype=np.int64)
    upper = np.zeros(max(start - 1, 0), dtype=np.int64)
    holes = False
    nxt = np.empty(0, dtype=np.int64)  # continuation interval of stage n+1
    w_next = np.zeros(0)               # value minus stopping cost on it
    for n in range(start - 1, 0, -1):
        T_n, T_next = thr(n), thr(n + 1)
        lo = bound_lower(problem, n) if t < t1 else 0
        hi = max(T_n, T_next, int(nxt[-1]) if len(nxt) else T_next)
        if t > t0:
            hi = min(hi, bound_upper(problem, n))
        if model.kind == "binomial":
            hi = min(hi, n * model.size)
        cont_set = np.empty(0, dtype=np.int64)
        if hi >= lo:
            s = np.arange(lo, hi + 1)
            if len(s) * max(len(nxt), 1) > MAX_CELLS:
                raise ResourceError(f"stage {n}: {len(s)} candidate states exceed the memory budget")
            g0, g1 = log_stops(n, s)
            stop = np.exp(np.where(s <= T_n, g1, g0))
            cont = 1.0 + expected_stop(n, s, T_next)
            if c:
                cont += c * np.exp((t1 - t) * s - n * (b1 - b))
            if len(nxt):
                cont += tab.kernel(s, nxt) @ w_next
            mask = cont < stop
            idx = np.nonzero(mask)[0]
            if len(idx):
                a_i, b_i = idx[0], idx[-1]
                if b_i - a_i + 1 != len(idx):
                    holes = True
                cont_set = s[a_i:b_i + 1]
                w_cur = np.minimum(cont[a_i:b_i + 1] - stop[a_i:b_i + 1], 0.0)
        if len(cont_set) == 0:
            # no continuation at stage n: the plan ends here
            H = n
            nxt = np.empty(0, dtype=np.int64)
            w_next = np.zeros(0)
            continue
        lower[n - 1], upper[n - 1] = cont_set[0], cont_set[-1]
        nxt, w_next = cont_set, w_cur

    lower, upper = lower[:H - 1], upper[:H - 1]
    thresholds = np.array([thr(n) for n in range(1, H + 1)], dtype=np.int64)
    T1 = thresholds[0]
    value = 1.0 + c + problem.lambda1 * float(tab1.cdf_at(T1)) + problem.lambda0 * float(tab0.sf_at(T1))
    if len(nxt):
        value += float(tab.pmf_at(nxt) @ w_next)
    if holes:
        warnings.warn("continuation region is not an interval at some stage; plan uses its hull",
                      RuntimeWarning, stacklevel=3)
    return TestPlan(H, lower, upper, thresholds, problem=problem, lagrangian_value=value,
                    possibly_suboptimal=holes, stop_after_first=(H == 1))


def design_modified(problem: DesignProblem) -> TestPlan:
    """Optimal plan for ``theta`` strictly between the hypotheses.

    The induction starts one stage past the horizon bound, where no state can
    continue, so the result is optimal among all (untruncated) plans.
    """
    if not problem.interior:
        raise ValueError("theta must lie strictly between theta0 and theta1; use design_truncated")
    if problem.penalty_c:
        raise ValueError("penalty_c is only supported by design_truncated")
    return _induct(problem, horizon_bound(problem) + 1)


def design_truncated(problem: DesignProblem, horizon_cap: int) -> TestPlan:
    """Optimal plan among plans taking at most ``horizon_cap`` observations.

    Works for any ``theta``, including values outside ``[theta0, theta1]``,
    and for the penalized criterion with ``problem.penalty_c > 0``.
    """
    if horizon_cap < 1:
        raise ValueError("horizon_cap must be >= 1")
    return _induct(problem, int(horizon_cap))


def design(problem: DesignProblem) -> TestPlan:
    if problem.horizon_cap == "auto":
        return design_modified(problem)
    return design_truncated(problem, int(problem.horizon_cap))
