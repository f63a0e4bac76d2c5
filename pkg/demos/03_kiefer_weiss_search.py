"""Approximating the Kiefer-Weiss test for a Bernoulli proportion.

The Kiefer-Weiss test minimizes the largest expected sample size over
all parameters.  We approximate it by choosing the parameter at which the
modified problem is solved so that the plan's expected sample size peaks
there.  The gap ``delta`` between the peak and the value at the chosen
parameter bounds how far we are from the true optimum.

A symmetric instance makes a good sanity check, since the answer must
sit at the midpoint.  The search takes a few minutes.
"""
import logging

from kieferweiss import binomial, solve_kiefer_weiss

logging.basicConfig(level=logging.INFO, format="%(message)s")

res = solve_kiefer_weiss(binomial(1), 0.3, 0.7, 0.1, 0.1)
print(f"\ntheta = {res.theta:.5f}, multipliers = ({res.lambda0:.2f}, {res.lambda1:.2f})")
print(f"errors: alpha = {res.achieved_alpha:.5f}, beta = {res.achieved_beta:.5f}")
print(f"peak ASN {res.sup_asn:.3f} at {res.argsup:.4f}; delta = {res.delta:.2e}")
for name, rep in res.report_at.items():
    print(f"  {name:>7}: ASN {rep.asn:7.2f}, Q.99 {rep.quantile_99}")
