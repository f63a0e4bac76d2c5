"""Numerical search: simplex minimization, multiplier fitting, Kiefer-Weiss search.

``fit_multipliers`` finds ``lambda0, lambda1`` for which the optimal plan of
the modified problem at a fixed ``theta`` has error probabilities closest to
the nominal ones.  ``solve_kiefer_weiss`` then searches ``theta`` so that
the fitted plan's ASN peaks at ``theta`` itself; the gap
``delta = sup N - N(theta)`` bounds the distance to the minimax solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import json
import logging
import math

import numpy as np

from .design import DesignProblem, TestPlan, design_modified
from .evaluate import (asn, asn_curve, default_grid, oc, performance,
                       reject_probability)
from .expfam import FamilyModel

__all__ = [
    "SimplexConfig",
    "SimplexResult",
    "SolveResult",
    "NonConvergence",
    "simplex_minimize",
    "relative_deviation",
    "fit_multipliers",
    "kw_delta",
    "solve_kiefer_weiss",
]

log = logging.getLogger(__name__)

KAPPA = 30.0  # lambda_i = KAPPA / (nominal error) as a starting point


class NonConvergence(RuntimeError):
    """Search budget exhausted; ``best`` holds the best point found."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True)
class SimplexConfig:
    """Settings for :func:`simplex_minimize`.

    ``step`` is the initial edge of the simplex, relative to ``|x0_i|``
    unless ``absolute_step`` is set.  The search stops when both the spread
    of objective values (``ftol_abs`` or ``ftol_rel``) and the simplex
    diameter (``xtol``) are small, when the best value drops to ``target``,
    or after ``max_iter`` iterations.
    """

    x0: tuple | None = None
    step: float = 0.05
    absolute_step: bool = False
    max_iter: int = 400
    ftol_abs: float = 1e-10
    ftol_rel: float = 1e-10
    xtol: float = 1e-8
    target: float = -math.inf

    def __post_init__(self):
        if min(self.ftol_abs, self.ftol_rel, self.xtol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def with_steps(self, step: float, absolute: bool = False) -> "SimplexConfig":
        return replace(self, step=step, absolute_step=absolute)


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool
    history: list = field(default_factory=list)  # best value after each iteration


def simplex_minimize(objective, x0, config: SimplexConfig | None = None, restarts: int = 0) -> SimplexResult:
    """Nelder-Mead minimization (reflection 1, expansion 2, contraction 1/2, shrink 1/2).

    ``objective`` may return ``inf`` for infeasible points.  With
    ``restarts > 0`` a converged search is restarted from its best point
    with a fresh simplex, which helps on piecewise-constant objectives; the
    restarts stop early once one brings no improvement.
    """
    config = config or SimplexConfig()
    res = _nelder_mead(objective, x0, config)
    step = config.step
    for _ in range(restarts):
        if res.fun <= config.target:
            break
        step /= 2.0
        again = _nelder_mead(objective, res.x, replace(config, step=step))
        improved = again.fun < res.fun
        res = SimplexResult(again.x if improved else res.x, min(again.fun, res.fun),
                            res.iterations + again.iterations, res.evaluations + again.evaluations,
                            again.converged, res.history + [min(v, res.fun) for v in again.history])
        if not improved:
            break
    return res


def _nelder_mead(objective, x0, config: SimplexConfig) -> SimplexResult:
    x0 = np.asarray(config.x0 if x0 is None else x0, dtype=float)
    k = len(x0)
    pts = [x0.copy()]
    for i in range(k):
        p = x0.copy()
        if config.absolute_step:
            p[i] += config.step
        else:
            p[i] += config.step * abs(p[i]) if p[i] != 0 else 0.00025
        pts.append(p)
    pts = np.array(pts)
    nfev = 0

    def f(x):
        nonlocal nfev
        nfev += 1
        v = objective(x)
        return math.inf if v is None or np.isnan(v) else float(v)

    vals = np.array([f(p) for p in pts])
    history = []
    it = 0
    converged = False
    while it < config.max_iter:
        order = np.argsort(vals, kind="stable")
        pts, vals = pts[order], vals[order]
        history.append(vals[0])
        if vals[0] <= config.target:
            converged = True
            break
        spread = vals[-1] - vals[0] if np.isfinite(vals[-1]) else math.inf
        diam = np.max(np.abs(pts[1:] - pts[0]))
        if (spread <= config.ftol_abs or spread <= config.ftol_rel * abs(vals[0])) and diam <= config.xtol:
            converged = True
            break
        it += 1
        centroid = pts[:-1].mean(axis=0)
        xr = centroid + (centroid - pts[-1])
        fr = f(xr)
        if fr < vals[0]:
            xe = centroid + 2.0 * (centroid - pts[-1])
            fe = f(xe)
            if fe < fr:
                pts[-1], vals[-1] = xe, fe
            else:
                pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                pts[-1], vals[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (pts[-1] - centroid)
            fc = f(xc)
            if fc < vals[-1]:
                pts[-1], vals[-1] = xc, fc
                continue
        pts[1:] = pts[0] + 0.5 * (pts[1:] - pts[0])
        vals[1:] = [f(p) for p in pts[1:]]
    order = np.argsort(vals, kind="stable")
    pts, vals = pts[order], vals[order]
    if not history or history[-1] != vals[0]:
        history.append(vals[0])
    return SimplexResult(pts[0].copy(), float(vals[0]), it, nfev, converged, history)


def relative_deviation(alpha_hat, beta_hat, alpha, beta) -> float:
    return max(abs(alpha_hat - alpha) / alpha, abs(beta_hat - beta) / beta)


@dataclass
class SolveResult:
    lambda0: float
    lambda1: float
    theta: float
    achieved_alpha: float
    achieved_beta: float
    rel_deviation: float
    delta: float
    plan: TestPlan
    report_at: dict = field(default_factory=dict)
    argsup: float = math.nan
    sup_asn: float = math.nan
    converged: bool = True
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "theta": self.theta,
            "achieved_alpha": self.achieved_alpha,
            "achieved_beta": self.achieved_beta,
            "rel_deviation": self.rel_deviation,
            "delta": self.delta,
            "argsup": self.argsup,
            "sup_asn": self.sup_asn,
            "converged": self.converged,
            "evaluations": self.evaluations,
            "report_at": {k: v.to_dict() for k, v in self.report_at.items()},
            "plan": self.plan.to_dict(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# when the start is off by more than START_SCAN_DEV, scan both multipliers times 2**k and
# then times 2**(k/START_SCAN_HALF), |k| <= START_SCAN_HALF
START_SCAN_DEV = 0.1
START_SCAN_HALF = 8
# step multiplier for the second pass when the first one ends above 0.002
WIDE_STEP_FACTOR = 5.0
FIT_CONFIG = SimplexConfig(step=0.1, absolute_step=True, max_iter=300, ftol_abs=1e-9, xtol=1e-7, target=2e-4)


def fit_multipliers(model: FamilyModel, theta0: float, theta1: float, theta: float, alpha: float, beta: float,
                    config: SimplexConfig | None = None, start=None) -> SolveResult:
    """Fit ``(lambda0, lambda1)`` at fixed ``theta`` to the nominal error probabilities.

    The search runs over ``(log lambda0, log lambda1)``.  ``start`` may give
    initial multipliers; the default is ``30/alpha, 30/beta``.  The
    returned result has ``delta`` left as ``nan``.
    """
    if not theta0 < theta < theta1:
        raise ValueError("theta must lie strictly between theta0 and theta1")
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("alpha and beta must lie in (0, 1)")
    config = config or FIT_CONFIG
    if start is None:
        start = (KAPPA / alpha, KAPPA / beta) if config.x0 is None else np.exp(config.x0)
    x0 = np.log(np.asarray(start, dtype=float))
    cache = {}

    def run(x):
        key = (float(x[0]), float(x[1]))
        if key not in cache:
            pr = DesignProblem(model, theta0, theta1, theta, math.exp(x[0]), math.exp(x[1]))
            plan = design_modified(pr)
            if plan.horizon == 1:
                cache[key] = (plan, math.nan, math.nan, math.inf)
            else:
                a = reject_probability(plan, model, theta0)
                b = oc(plan, model, theta1)
                cache[key] = (plan, a, b, relative_deviation(a, b, alpha, beta))
        return cache[key]

    if run(x0)[3] > START_SCAN_DEV:
        # far from the target, the objective is often flat under small steps
        # (the integer plan does not change), so first rescale both multipliers
        for base in (2.0, 2.0 ** (1.0 / START_SCAN_HALF)):
            shifts = math.log(base) * np.arange(-START_SCAN_HALF, START_SCAN_HALF + 1)
            x0 = min((x0 + k for k in shifts), key=lambda x: run(x)[3])
    res = simplex_minimize(lambda x: run(x)[3], x0, config, restarts=6)
    if res.fun > 0.002 and config.absolute_step:
        # stuck on a plateau of the step-function objective: try wider moves
        wide = replace(config, step=WIDE_STEP_FACTOR * config.step)
        again = simplex_minimize(lambda x: run(x)[3], res.x, wide, restarts=6)
        if again.fun < res.fun:
            again.evaluations += res.evaluations
            res = again
    plan, a, b, dev = run(res.x)
    log.info("fit theta=%.6g lambda=(%.6g, %.6g) dev=%.3g evals=%d", theta, *np.exp(res.x), dev, res.evaluations)
    return SolveResult(float(math.exp(res.x[0])), float(math.exp(res.x[1])), theta, a, b, dev, math.nan, plan,
                       converged=res.converged or dev <= 0.002, evaluations=res.evaluations)


def kw_delta(plan: TestPlan, model: FamilyModel, theta: float, grid=None, tol: float = 1e-6):
    """``(delta, argsup, sup)`` with ``delta = sup_t N(t) - N(theta)`` for ``plan``."""
    p = plan.problem
    if grid is None:
        grid = default_grid(model, p.theta0, p.theta1)
    grid = np.union1d(np.asarray(grid, dtype=float), [theta])
    _, arg, sup = asn_curve(plan, model, grid, tol)
    return sup - asn(plan, model, theta), arg, sup


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def solve_kiefer_weiss(model: FamilyModel, theta0: float, theta1: float, alpha: float, beta: float,
                       config: SimplexConfig | None = None, grid_points: int = 9, theta_tol: float = 1e-5,
                       level: float = 0.99) -> SolveResult:
    """Approximate Kiefer-Weiss test: minimize ``delta`` over ``theta`` in ``(theta0, theta1)``.

    A coarse grid of ``grid_points`` values picks a bracket, which
    golden-section search then narrows to ``theta_tol``.  Each ``theta``
    costs one multiplier fit; fits are warm-started from the nearest
    ``theta`` already fitted.
    """
    if not theta0 < theta1:
        raise ValueError("theta0 must be smaller than theta1")
    fits: dict[float, SolveResult] = {}

    def delta_at(t):
        if t in fits:
            return fits[t].delta
        start = None
        if fits:
            near = min(fits, key=lambda u: abs(u - t))
            start = (fits[near].lambda0, fits[near].lambda1)
        r = fit_multipliers(model, theta0, theta1, t, alpha, beta, config, start)
        if r.plan.horizon == 1:
            r.delta = math.inf
        else:
            r.delta, r.argsup, r.sup_asn = kw_delta(r.plan, model, t)
        log.info("theta=%.7g delta=%.3g", t, r.delta)
        fits[t] = r
        return r.delta

    w = theta1 - theta0
    grid = [theta0 + w * (i + 1) / (grid_points + 1) for i in range(grid_points)]
    # fit from the middle outwards so warm starts move gradually
    for t in sorted(grid, key=lambda u: abs(u - (theta0 + theta1) / 2)):
        delta_at(t)
    i = int(np.argmin([fits[t].delta for t in grid]))
    lo = grid[i - 1] if i > 0 else theta0 + 1e-3 * w
    hi = grid[i + 1] if i < len(grid) - 1 else theta1 - 1e-3 * w
    c, d = hi - _INVPHI * (hi - lo), lo + _INVPHI * (hi - lo)
    fc, fd = delta_at(c), delta_at(d)
    while hi - lo > theta_tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = delta_at(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = delta_at(d)
    best_t = min(fits, key=lambda t: (fits[t].delta, t))
    best = fits[best_t]
    p = best.plan
    best.report_at = {
        name: performance(p, model, t, theta0, theta1, level)
        for name, t in (("theta0", theta0), ("theta1", theta1), ("theta", best_t), ("argsup", best.argsup))
    }
    best.evaluations = sum(r.evaluations for r in fits.values())
    best.converged = all(r.converged for r in fits.values()) or best.rel_deviation <= 0.002
    return best
