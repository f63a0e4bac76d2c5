import itertools

import numpy as np


def enumerate_paths(plan, model, theta_user):
    """Exact OC, ASN and tail probabilities by listing every outcome sequence.

    Only for bounded supports and short horizons.
    """
    t = model.natural(theta_user)
    support = np.arange(model.size + 1)
    f = model.suff_pmf(t, 1, support)
    H = plan.horizon
    oc = asn = 0.0
    tail = np.zeros(H + 1)
    for xs in itertools.product(range(len(support)), repeat=H):
        p = float(np.prod(f[list(xs)]))
        s = 0
        for n in range(1, H + 1):
            s += xs[n - 1]
            if n == H or not (plan.lower[n - 1] <= s <= plan.upper[n - 1]):
                break
        asn += p * n
        oc += p * (s <= plan.thresholds[n - 1])
        tail[:n] += p
    return oc, asn, tail


def lagrangian_brute_force(model, theta0, theta1, theta, lambda0, lambda1, H, penalty_c=0.0):
    """Minimum of ``N(theta) + c N(theta1) + lambda0 alpha + lambda1 beta`` over all
    sufficient-statistic rules with at most ``H`` observations (binomial models).

    Stopping rules are listed exhaustively.  Terminal decisions are listed
    exhaustively too when there are at most 12 stopping states; otherwise
    each stopped state takes the cheaper decision, which is exact because
    the cost is a sum over stopped states.
    """
    m = model.size
    states = [(n, s) for n in range(1, H) for s in range(n * m + 1)]
    stops = [(n, s) for n in range(1, H + 1) for s in range(n * m + 1)]
    stop_index = {st: i for i, st in enumerate(stops)}
    paths = np.array(list(itertools.product(range(m + 1), repeat=H)))
    sums = paths.cumsum(axis=1)

    def path_probs(u):
        f = model.suff_pmf(model.natural(u), 1, np.arange(m + 1))
        return f[paths].prod(axis=1)

    p, p0, p1 = path_probs(theta), path_probs(theta0), path_probs(theta1)
    full = len(stops) <= 12
    if full:
        decisions = np.array(list(itertools.product((0, 1), repeat=len(stops))), dtype=float)
    best = np.inf
    for bits in itertools.product((False, True), repeat=len(states)):
        cont = dict(zip(states, bits))
        tau = np.full(len(paths), H)
        for n in range(H - 1, 0, -1):
            going = np.array([cont[(n, s)] for s in sums[:, n - 1]])
            tau = np.where(going, tau, n)
        final = sums[np.arange(len(paths)), tau - 1]
        idx = np.array([stop_index[(n, s)] for n, s in zip(tau, final)])
        w0 = np.bincount(idx, p0, len(stops))  # P_theta0(stop at state)
        w1 = np.bincount(idx, p1, len(stops))
        base = (p * tau).sum() + penalty_c * (p1 * tau).sum()
        if full:
            # decision 1 = accept H1
            cost = decisions @ (lambda0 * w0) + (1 - decisions) @ (lambda1 * w1)
            val = base + cost.min()
        else:
            val = base + np.minimum(lambda0 * w0, lambda1 * w1).sum()
        best = min(best, val)
    return best
