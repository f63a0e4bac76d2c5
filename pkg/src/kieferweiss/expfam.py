"""Discrete one-parameter exponential families on the non-negative integers.

Every family is written as ``f(x) = exp(theta*x - b(theta)) * h(x)`` with
``theta`` the natural parameter.  Users work with the usual parameter
(success probability for the binomial, mean for Poisson and negative
binomial); the natural scale is internal.

The sum ``S_n`` of ``n`` observations has pmf
``g_n(s) = C_n(s) * exp(theta*s - n*b(theta))`` where ``C_n`` is the n-fold
convolution of ``h``.  All three families have closed forms for ``C_n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import functools
import math

import numpy as np
from scipy import stats
from scipy.special import gammaln

__all__ = [
    "FamilyModel",
    "ObsTable",
    "binomial",
    "poisson",
    "negative_binomial",
    "geometric",
    "natural_param",
    "log_c",
    "suff_pmf",
    "transition_weight",
    "obs_cdf",
]

KINDS = ("binomial", "poisson", "negative_binomial")

# tail mass below which an observation table is cut
TAIL_CUT = 1e-30
KERNEL_CACHE = 512


@dataclass(frozen=True)
class FamilyModel:
    """A discrete exponential family.

    ``size`` is the number of trials ``m`` for the binomial and the shape
    ``r`` for the negative binomial (``r = 1`` is the geometric law on
    ``{0, 1, 2, ...}``).  It is ignored for the Poisson.
    """

    kind: str
    size: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family {self.kind!r}; expected one of {KINDS}")
        if self.kind == "poisson":
            object.__setattr__(self, "size", 1)
        elif int(self.size) != self.size or self.size < 1:
            raise ValueError("size must be a positive integer")

    # -- parameter maps -------------------------------------------------
    def check_user(self, user: float) -> None:
        if self.kind == "binomial":
            ok = 0.0 < user < 1.0
        else:
            ok = 0.0 < user < math.inf
        if not ok:
            raise ValueError(f"parameter {user!r} outside the {self.kind} parameter space")

    def natural(self, user: float) -> float:
        """Map the user-scale parameter to the natural parameter."""
        self.check_user(user)
        if self.kind == "poisson":
            return math.log(user)
        if self.kind == "binomial":
            return math.log(user) - math.log1p(-user)
        return math.log(user) - math.log(user + self.size)

    def user(self, theta: float) -> float:
        """Inverse of :meth:`natural`."""
        if self.kind == "poisson":
            return math.exp(theta)
        if self.kind == "binomial":
            return 1.0 / (1.0 + math.exp(-theta))
        if theta >= 0.0:
            raise ValueError("negative binomial natural parameter must be negative")
        q = math.exp(theta)
        return self.size * q / (1.0 - q)

    def b(self, theta: float) -> float:
        """Log-partition function of one observation."""
        if self.kind == "poisson":
            return math.exp(theta)
        if self.kind == "binomial":
            return self.size * _log1pexp(theta)
        if theta >= 0.0:
            raise ValueError("negative binomial natural parameter must be negative")
        return -self.size * math.log1p(-math.exp(theta))

    def variance(self, theta: float) -> float:
        """``b''(theta)``, the variance of one observation."""
        mu = self.user(theta)
        if self.kind == "poisson":
            return mu
        if self.kind == "binomial":
            return self.size * mu * (1.0 - mu)
        return mu * (1.0 + mu / self.size)

    @property
    def support_max(self) -> float:
        """Largest value of one observation (``inf`` for unbounded supports)."""
        return self.size if self.kind == "binomial" else math.inf

    @property
    def params(self) -> dict:
        if self.kind == "binomial":
            return {"m": self.size}
        if self.kind == "negative_binomial":
            return {"r": self.size}
        return {}

    # -- combinatorial weights ------------------------------------------
    def log_c(self, n, s):
        """``log C_n(s)``; ``-inf`` where ``C_n(s) = 0``.  Vectorized in ``s``."""
        s = np.asarray(s, dtype=float)
        if self.kind == "poisson":
            with np.errstate(divide="ignore"):
                out = s * math.log(n) - gammaln(s + 1.0)
        elif self.kind == "binomial":
            nm = n * self.size
            inside = (s >= 0) & (s <= nm)
            ss = np.where(inside, s, 0.0)
            out = np.where(inside, gammaln(nm + 1.0) - gammaln(ss + 1.0) - gammaln(nm - ss + 1.0), -np.inf)
        else:
            nr = n * self.size
            out = gammaln(s + nr) - gammaln(s + 1.0) - gammaln(nr)
        out = np.where(s < 0, -np.inf, out)
        return out[()] if out.ndim == 0 else out

    def log_h(self, x):
        return self.log_c(1, x)

    # -- distributions ----------------------------------------------------
    def dist(self, theta: float, n: int = 1):
        """Frozen scipy distribution of ``S_n`` at natural parameter ``theta``."""
        mu = self.user(theta)
        if self.kind == "poisson":
            return stats.poisson(n * mu)
        if self.kind == "binomial":
            return stats.binom(n * self.size, mu)
        r = self.size
        return stats.nbinom(n * r, r / (mu + r))

    def log_suff_pmf(self, theta: float, n: int, s):
        """``log g_n(s)`` from the closed form ``log C_n(s) + theta*s - n*b(theta)``."""
        return self.log_c(n, s) + theta * np.asarray(s, dtype=float) - n * self.b(theta)

    def suff_pmf(self, theta: float, n: int, s):
        with np.errstate(invalid="ignore"):
            return np.exp(self.log_suff_pmf(theta, n, s))

    def transition_weight(self, n: int, x, s):
        """``d_n(x, s) = C_1(x) C_{n-1}(s) / C_n(s + x)``.

        It is the conditional probability that the n-th observation equals
        ``x`` given ``S_n = s + x``, and does not depend on the parameter.
        """
        if n < 2:
            raise ValueError("transition weights are defined for n >= 2")
        x = np.asarray(x, dtype=float)
        s = np.asarray(s, dtype=float)
        denom = self.log_c(n, s + x)
        if np.any(np.isneginf(denom)):
            raise ValueError("transition weight undefined: C_n(s + x) = 0")
        out = np.exp(self.log_c(1, x) + self.log_c(n - 1, s) - denom)
        return out[()] if np.ndim(out) == 0 else out

    def obs_cdf(self, theta: float, k):
        """``P(X <= k)`` for one observation; 0 for ``k < 0``."""
        return self.dist(theta).cdf(k)

    def obs_table(self, theta: float) -> "ObsTable":
        """Tabulated single-observation distribution at natural parameter ``theta`` (memoized)."""
        return _obs_table(self, float(theta))

    def __str__(self):
        if self.kind == "binomial":
            return f"binomial(m={self.size})"
        if self.kind == "negative_binomial":
            return f"negative_binomial(r={self.size})"
        return "poisson"


def _log1pexp(t: float) -> float:
    return t + math.log1p(math.exp(-t)) if t > 0 else math.log1p(math.exp(t))


def binomial(m: int) -> FamilyModel:
    return FamilyModel("binomial", m)


def poisson() -> FamilyModel:
    return FamilyModel("poisson")


def negative_binomial(r: int) -> FamilyModel:
    return FamilyModel("negative_binomial", r)


def geometric() -> FamilyModel:
    return FamilyModel("negative_binomial", 1)


def family_from_name(name: str, m: int | None = None, r: int | None = None) -> FamilyModel:
    """Build a model from a CLI/JSON style name."""
    name = name.lower()
    if name == "binomial":
        return binomial(1 if m is None else m)
    if name == "bernoulli":
        return binomial(1)
    if name == "poisson":
        return poisson()
    if name in ("negative_binomial", "negbin", "pascal"):
        return negative_binomial(1 if r is None else r)
    if name == "geometric":
        return geometric()
    raise ValueError(f"unknown family {name!r}")


@dataclass(frozen=True, eq=False)
class ObsTable:
    """Tabulated pmf, cdf and survivor function of one observation.

    Unbounded supports are cut where the remaining mass drops below
    ``TAIL_CUT``; lookups past the cut return pmf 0, cdf 1 and sf 0.
    """

    theta: float
    pmf: np.ndarray
    cdf: np.ndarray
    sf: np.ndarray
    _kernels: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, model: FamilyModel, theta: float) -> "ObsTable":
        d = model.dist(theta)
        if model.kind == "binomial":
            xmax = model.size
        else:
            xmax = int(d.mean() + 10.0 * d.std()) + 10
            while d.sf(xmax) > TAIL_CUT:
                xmax *= 2
        x = np.arange(xmax + 1)
        return cls(theta, d.pmf(x), d.cdf(x), d.sf(x))

    @property
    def xmax(self) -> int:
        return len(self.pmf) - 1

    def __post_init__(self):
        # padded copies so that out-of-range lookups become a clip and a take
        object.__setattr__(self, "_pmf_pad", np.concatenate([[0.0], self.pmf, [0.0]]))
        object.__setattr__(self, "_cdf_pad", np.concatenate([[0.0], self.cdf, [1.0]]))
        object.__setattr__(self, "_sf_pad", np.concatenate([[1.0], self.sf, [0.0]]))

    def _lookup(self, pad, x):
        return pad[np.clip(np.asarray(x) + 1, 0, len(pad) - 1)]

    def pmf_at(self, x):
        return self._lookup(self._pmf_pad, x)

    def cdf_at(self, k):
        """``P(X <= k)`` for integer arrays ``k``."""
        return self._lookup(self._cdf_pad, k)

    def sf_at(self, k):
        """``P(X > k)`` for integer arrays ``k``."""
        return self._lookup(self._sf_pad, k)

    def kernel(self, rows, cols):
        """Matrix ``f(cols[j] - rows[i])`` of one-step transition probabilities."""
        return self.pmf_at(np.asarray(cols)[None, :] - np.asarray(rows)[:, None])

    def band(self, offset: int, n_rows: int, n_cols: int) -> np.ndarray:
        """:meth:`kernel` for ``rows = r + arange(n_rows)``, ``cols = r + offset + arange(n_cols)``.

        It depends only on the three integers, so results are cached (read-only).
        """
        key = (offset, n_rows, n_cols)
        k = self._kernels.get(key)
        if k is None:
            if len(self._kernels) >= KERNEL_CACHE:
                self._kernels.clear()
            k = self.pmf_at(offset + np.arange(n_cols)[None, :] - np.arange(n_rows)[:, None])
            k.flags.writeable = False
            self._kernels[key] = k
        return k


@functools.lru_cache(maxsize=64)
def _obs_table(model: FamilyModel, theta: float) -> ObsTable:
    return ObsTable.build(model, theta)


# module-level forms of the model methods


def natural_param(model: FamilyModel, user: float) -> float:
    return model.natural(user)


def log_c(model: FamilyModel, n: int, s):
    if n < 1:
        raise ValueError("n must be >= 1")
    return model.log_c(n, s)


def suff_pmf(model: FamilyModel, theta: float, n: int, s):
    if n < 1:
        raise ValueError("n must be >= 1")
    return model.suff_pmf(theta, n, s)


def transition_weight(model: FamilyModel, n: int, x, s):
    return model.transition_weight(n, x, s)


def obs_cdf(model: FamilyModel, theta: float, k):
    return model.obs_cdf(theta, k)
