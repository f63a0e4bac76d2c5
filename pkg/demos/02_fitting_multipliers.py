"""Finding the multipliers that deliver prescribed error probabilities.

The optimal test minimizes ``N(theta) + lambda0 * alpha + lambda1 * beta``.
Larger multipliers buy smaller errors at the cost of more observations.
Here we watch that trade-off for the geometric family (means 1 vs 2) and
then let the simplex search find the multipliers for alpha = beta = 0.1.
"""
from kieferweiss import DesignProblem, design_modified, fit_multipliers, geometric
from kieferweiss.evaluate import asn, oc, reject_probability

model = geometric()
theta0, theta1, theta = 1.0, 2.0, 1.27794

print(f"{'lambda':>8} {'alpha':>8} {'beta':>8} {'N(theta)':>9}")
for lam in (10.0, 30.0, 69.0, 150.0, 400.0):
    plan = design_modified(DesignProblem(model, theta0, theta1, theta, lam, 1.22 * lam))
    print(f"{lam:8.1f} {reject_probability(plan, model, theta0):8.4f} {oc(plan, model, theta1):8.4f} "
          f"{asn(plan, model, theta):9.2f}")

fit = fit_multipliers(model, theta0, theta1, theta, 0.1, 0.1)
print(f"\nfitted multipliers: {fit.lambda0:.2f}, {fit.lambda1:.2f}")
print(f"achieved errors: alpha = {fit.achieved_alpha:.5f}, beta = {fit.achieved_beta:.5f} "
      f"(relative deviation {fit.rel_deviation:.4f})")
print(f"plan horizon: {fit.plan.horizon}")
