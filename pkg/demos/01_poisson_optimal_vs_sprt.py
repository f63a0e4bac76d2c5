"""Optimal sequential test for Poisson means 0.5 vs 0.7, set against Wald's SPRT.

We take the Lagrange multipliers printed for the alpha = beta = 0.1 case,
build the optimal test by backward induction and look at how it behaves
across the parameter range.  Then we do the same for an SPRT with the
same error probabilities and for the best fixed-sample-size test.

Run with ``python demos/01_poisson_optimal_vs_sprt.py``.
"""
import math

from kieferweiss import DesignProblem, SprtDesign, design_modified, fss, performance, poisson, sprt_plan_auto
from kieferweiss.fss import efficiency_ratios

model = poisson()
theta0, theta1 = 0.5, 0.7
theta = 0.58464  # the parameter where the expected sample size is minimized

# Backward induction from the multipliers gives the whole plan: one
# continuation interval per stage plus an accept threshold.
problem = DesignProblem(model, theta0, theta1, theta, lambda0=305.94, lambda1=326.39)
plan = design_modified(problem)
print(f"optimal plan: horizon {plan.horizon}, continuation at n=10 is "
      f"[{plan.lower[9]}, {plan.upper[9]}]")

# The SPRT bounds below are natural logs of Wald's A and B.
wald = sprt_plan_auto(SprtDesign(-0.916 * math.log(10), 0.868 * math.log(10)), model, theta0, theta1,
                      thetas=(theta0, theta, theta1))

print(f"\n{'theta':>8} {'ASN opt':>9} {'ASN SPRT':>9} {'P(accept H0) opt':>17}")
for t in (0.4, 0.5, 0.55, theta, 0.65, 0.7, 0.8):
    a = performance(plan, model, t, theta0, theta1)
    w = performance(wald, model, t, theta0, theta1)
    print(f"{t:8.5f} {a.asn:9.2f} {w.asn:9.2f} {a.oc:17.4f}")

# Efficiency relative to the Neyman-Pearson test with the same errors.
n_fixed = fss(model, theta0, theta1, 0.1, 0.1)
for name, p in (("optimal", plan), ("SPRT", wald)):
    reps = {k: performance(p, model, t, theta0, theta1) for k, t in (("t", theta), ("t0", theta0), ("t1", theta1))}
    r = efficiency_ratios(n_fixed, reps["t"].asn, reps["t0"].asn, reps["t1"].asn, reps["t"].quantile_99)
    print(f"\n{name}: Q.99 = {reps['t'].quantile_99}, "
          + ", ".join(f"{k} = {v:.2f}" for k, v in r.items()))
print(f"\nfixed sample size needed: {n_fixed:.2f}")
