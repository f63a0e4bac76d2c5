"""Optimal sequential tests in Kiefer-Weiss problems for discrete exponential families."""
from .expfam import FamilyModel, binomial, poisson, negative_binomial, geometric, family_from_name
from .evaluate import EvalPlan, PerformanceReport, oc, asn, tail_probability, quantile, asn_curve, performance
from .design import DesignProblem, TestPlan, design, design_modified, design_truncated, horizon_bound
from .sprt import SprtDesign, sprt_plan, sprt_plan_auto, fit_sprt
from .fss import np_beta, fss, efficiency_ratios
from .solve import SimplexConfig, simplex_minimize, fit_multipliers, solve_kiefer_weiss, SolveResult

__version__ = "0.1.0"
