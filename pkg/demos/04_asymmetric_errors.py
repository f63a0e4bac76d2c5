"""Very unequal error probabilities: alpha = 0.1 and beta = 0.0005.

With such asymmetric requirements the SPRT is cheap at the hypotheses
but expensive in between: its expected sample size peaks well above the
optimal test's, and its 0.99 quantile is nearly twice as large.  Binomial(3) observations, success probability 0.05 vs 0.08.
"""
from kieferweiss import (DesignProblem, SprtDesign, binomial, design_modified, fss, performance,
                         sprt_plan_auto)

model = binomial(3)
theta0, theta1, theta = 0.05, 0.08, 0.05551

plan = design_modified(DesignProblem(model, theta0, theta1, theta, 948.57, 91786.79))
wald = sprt_plan_auto(SprtDesign(-7.4481, 2.1115), model, theta0, theta1, thetas=(theta0, theta, theta1))
n_fixed = fss(model, theta0, theta1, 0.1, 0.0005)

print(f"optimal test truncates at {plan.horizon} observations; the fixed-size test needs {n_fixed:.2f}")
print(f"{'':>10} {'optimal':>10} {'SPRT':>10}")
for name, t in (("theta", theta), ("theta0", theta0), ("theta1", theta1)):
    a = performance(plan, model, t, theta0, theta1)
    w = performance(wald, model, t, theta0, theta1)
    print(f"{'N(' + name + ')':>10} {a.asn:10.2f} {w.asn:10.2f}")
a = performance(plan, model, theta, theta0, theta1)
w = performance(wald, model, theta, theta0, theta1)
print(f"{'Q.99':>10} {a.quantile_99:10d} {w.quantile_99:10d}")
print(f"{'alpha':>10} {a.alpha:10.5f} {w.alpha:10.5f}")
print(f"{'beta':>10} {a.beta:10.6f} {w.beta:10.6f}")
