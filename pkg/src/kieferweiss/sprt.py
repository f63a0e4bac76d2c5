"""Wald's SPRT written as a plan on the sufficient statistic.

With ``dt = theta1 - theta0`` and ``db = b(theta1) - b(theta0)`` (natural
scale) the log likelihood ratio after ``n`` observations is
``dt * S_n - n * db``.  The test continues while it lies strictly inside
``(log_a, log_b)``; hitting ``log_a`` accepts H0 and ``log_b`` accepts H1.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict
import json
import math

import numpy as np

from .evaluate import EvalPlan, oc, reject_probability, survival
from .expfam import FamilyModel

__all__ = ["SprtDesign", "sprt_plan", "sprt_plan_auto", "sprt_errors", "fit_sprt", "wald_start"]

START_CAP = 256
TAIL_TOL = 1e-12


@dataclass(frozen=True)
class SprtDesign:
    log_a: float
    log_b: float
    achieved_alpha: float = math.nan
    achieved_beta: float = math.nan
    rel_deviation: float = math.nan
    converged: bool = True

    def __post_init__(self):
        if not self.log_a < self.log_b:
            raise ValueError("log_a must be smaller than log_b")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _llr_coeffs(model: FamilyModel, theta0: float, theta1: float):
    t0, t1 = model.natural(theta0), model.natural(theta1)
    return t1 - t0, model.b(t1) - model.b(t0)


def sprt_plan(design: SprtDesign, model: FamilyModel, theta0: float, theta1: float, cap: int) -> EvalPlan:
    """The SPRT truncated at ``cap``; at the cap H0 is accepted iff the log LR is <= 0."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    dt, db = _llr_coeffs(model, theta0, theta1)
    n = np.arange(1, cap + 1)
    lo = (design.log_a + n * db) / dt
    hi = (design.log_b + n * db) / dt
    # open band (lo, hi) in integers
    lower = np.floor(lo[:-1]).astype(np.int64) + 1
    upper = np.ceil(hi[:-1]).astype(np.int64) - 1
    thresholds = np.floor(lo).astype(np.int64)
    thresholds[-1] = math.floor(cap * db / dt)
    return EvalPlan(cap, lower, upper, thresholds)


def sprt_plan_auto(design: SprtDesign, model: FamilyModel, theta0: float, theta1: float,
                   thetas=(), cap: int = START_CAP, tol: float = TAIL_TOL, max_cap: int = 1 << 20) -> EvalPlan:
    """Truncate the SPRT at a cap where ``P(tau > cap) < tol`` at every parameter of interest.

    The cap starts at ``cap`` and doubles; ``thetas`` defaults to the two hypotheses.
    """
    thetas = tuple(thetas) or (theta0, theta1)
    while True:
        plan = sprt_plan(design, model, theta0, theta1, cap)
        worst = max(survival(plan, model, t)[cap - 1] for t in thetas)
        if worst < tol or cap >= max_cap:
            return plan
        cap *= 2


def sprt_errors(design: SprtDesign, model: FamilyModel, theta0: float, theta1: float, cap: int | None = None):
    """``(alpha, beta)`` of the SPRT, with the cap chosen automatically when not given."""
    if cap is None:
        plan = sprt_plan_auto(design, model, theta0, theta1)
    else:
        plan = sprt_plan(design, model, theta0, theta1, cap)
    return reject_probability(plan, model, theta0), oc(plan, model, theta1)


def wald_start(alpha: float, beta: float) -> tuple[float, float]:
    """Wald's approximate boundaries ``log(beta/(1-alpha))`` and ``log((1-beta)/alpha)``."""
    return math.log(beta / (1.0 - alpha)), math.log((1.0 - beta) / alpha)


def fit_sprt(model: FamilyModel, theta0: float, theta1: float, alpha: float, beta: float,
             config=None) -> SprtDesign:
    """Boundaries whose exact error probabilities best match ``(alpha, beta)``.

    Minimizes ``max(|alpha' - alpha|/alpha, |beta' - beta|/beta)`` over
    ``(log_a, log_b)`` with the simplex method, starting from Wald's
    approximation.
    """
    from .solve import SimplexConfig, NonConvergence, simplex_minimize, relative_deviation

    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("alpha and beta must lie in (0, 1)")
    x0 = np.array(wald_start(alpha, beta))
    if config is None:
        config = SimplexConfig(step=0.05, absolute_step=True, max_iter=300, ftol_abs=1e-9, xtol=1e-7, target=2e-4)
    cap = [START_CAP]

    def objective(x):
        if not x[0] < 0 < x[1]:
            return math.inf
        d = SprtDesign(float(x[0]), float(x[1]))
        plan = sprt_plan_auto(d, model, theta0, theta1, cap=cap[0])
        cap[0] = plan.horizon
        a = reject_probability(plan, model, theta0)
        b = oc(plan, model, theta1)
        return relative_deviation(a, b, alpha, beta)

    res = simplex_minimize(objective, x0, config, restarts=6)
    d = SprtDesign(float(res.x[0]), float(res.x[1]))
    a, b = sprt_errors(d, model, theta0, theta1)
    out = SprtDesign(d.log_a, d.log_b, a, b, relative_deviation(a, b, alpha, beta), res.converged)
    if not res.converged and out.rel_deviation > 0.002:
        raise NonConvergence("SPRT fit did not converge", out)
    return out
