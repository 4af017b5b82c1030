"""Node threshold distributions and the analytic quantities built on them.

Three families are supported: uniform on [0, 1], unit-rate exponential, and
beta(alpha, beta) on [0, 1].  Each spec exposes the cdf, survival function,
density, density derivative, inverse cdf, the support bound h, and two
analytic flags used downstream:

* ``log_concave_density`` -- the per-node log-likelihood is concave exactly
  when this holds (uniform: yes; exponential: yes; beta: alpha >= 1 and
  beta >= 1);
* ``concave_cdf`` -- the sufficient condition for a submodular influence
  function (uniform: yes; exponential: yes; beta: alpha <= 1 and beta >= 1).

Survival-function paths avoid the 1 - F cancellation as F -> 1, and
``log_interval_prob`` gives a stable log(F(x) - F(y)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "ThresholdSpec",
    "make_uniform",
    "make_exponential_unit",
    "make_beta",
    "make_beta_fit_safe",
    "check_concave_cdf",
    "spec_to_dict",
    "spec_from_dict",
]

# differences below this are treated as numerically zero on the generic
# (incomplete-beta) path, which is only trustworthy to ~1e-15 absolute
_BETA_DIFF_TOL = 1e-15
_LOG_FLOOR = 1e-300


def _check_nonnegative(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("threshold arguments must be nonnegative")
    return x


@dataclass(frozen=True)
class ThresholdSpec:
    """A node's threshold distribution (closed enumeration of families)."""

    family: str
    alpha: float = None
    beta: float = None

    def __post_init__(self):
        if self.family not in ("uniform", "exponential", "beta"):
            raise ValueError(f"unknown threshold family {self.family!r}")
        if self.family == "beta":
            if self.alpha is None or self.beta is None:
                raise ValueError("beta thresholds need alpha and beta")
            if self.alpha <= 0 or self.beta <= 0:
                raise ValueError(
                    f"beta parameters must be positive, got "
                    f"({self.alpha}, {self.beta})"
                )

    @property
    def support_bound(self) -> float:
        return np.inf if self.family == "exponential" else 1.0

    @property
    def log_concave_density(self) -> bool:
        if self.family == "beta":
            return self.alpha >= 1.0 and self.beta >= 1.0
        return True

    @property
    def concave_cdf(self) -> bool:
        if self.family == "beta":
            return self.alpha <= 1.0 and self.beta >= 1.0
        return True

    # -- distribution functions -------------------------------------------

    def cdf(self, x):
        x = _check_nonnegative(x)
        if self.family == "uniform":
            out = np.clip(x, 0.0, 1.0)
        elif self.family == "exponential":
            out = -np.expm1(-x)
        else:
            out = special.betainc(self.alpha, self.beta, np.clip(x, 0.0, 1.0))
        return out if out.ndim else float(out)

    def sf(self, x):
        """Survival function 1 - F(x), computed without cancellation."""
        x = _check_nonnegative(x)
        if self.family == "uniform":
            out = np.clip(1.0 - x, 0.0, 1.0)
        elif self.family == "exponential":
            out = np.exp(-x)
        else:
            out = special.betainc(self.beta, self.alpha, 1.0 - np.clip(x, 0.0, 1.0))
        return out if out.ndim else float(out)

    def density(self, x):
        x = _check_nonnegative(x)
        if self.family == "uniform":
            out = np.where(x <= 1.0, 1.0, 0.0)
        elif self.family == "exponential":
            out = np.exp(-x)
        else:
            xc = np.clip(x, 0.0, 1.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.power(xc, self.alpha - 1.0) * np.power(
                    1.0 - xc, self.beta - 1.0
                )
            out = np.where(x > 1.0, 0.0, out / special.beta(self.alpha, self.beta))
        return out if out.ndim else float(out)

    def density_derivative(self, x):
        x = _check_nonnegative(x)
        if self.family == "uniform":
            out = np.zeros_like(x)
        elif self.family == "exponential":
            out = -np.exp(-x)
        else:
            a, b = self.alpha, self.beta
            xc = np.clip(x, 0.0, 1.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                term1 = (a - 1.0) * np.power(xc, a - 2.0) * np.power(1.0 - xc, b - 1.0)
                term2 = (b - 1.0) * np.power(xc, a - 1.0) * np.power(1.0 - xc, b - 2.0)
            out = np.where(x > 1.0, 0.0, (term1 - term2) / special.beta(a, b))
        return out if out.ndim else float(out)

    def inverse_cdf(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p < 0) | (p > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.family == "uniform":
            out = p.copy()
        elif self.family == "exponential":
            out = -np.log1p(-p)
        else:
            out = special.betaincinv(self.alpha, self.beta, p)
        return out if out.ndim else float(out)

    # -- stable log quantities ---------------------------------------------

    def log_sf(self, x):
        x = _check_nonnegative(x)
        if self.family == "exponential":
            out = -x
        else:
            with np.errstate(divide="ignore"):
                out = np.log(np.maximum(self.sf(x), 0.0))
        return out if out.ndim else float(out)

    def interval_prob(self, x, y):
        """F(x) - F(y) for x >= y, via the complementary cdf when generic."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.family == "uniform":
            out = np.clip(x, 0.0, 1.0) - np.clip(y, 0.0, 1.0)
        elif self.family == "exponential":
            out = np.exp(-y) - np.exp(-x)
        else:
            out = np.asarray(self.sf(y) - self.sf(x))
        out = np.maximum(out, 0.0)
        return out if out.ndim else float(out)

    def log_interval_prob(self, x, y):
        """log(F(x) - F(y)), closed form where the family allows it."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.family == "uniform":
                out = np.log(np.clip(x, 0.0, 1.0) - np.clip(y, 0.0, 1.0))
            elif self.family == "exponential":
                # log(e^{-y} - e^{-x}) = -y + log(1 - e^{-(x-y)})
                out = -y + np.log(-np.expm1(-(x - y)))
            else:
                out = np.log(np.maximum(self.interval_prob(x, y), _LOG_FLOOR))
        return out if out.ndim else float(out)

    def interval_zero_tol(self) -> float:
        """Differences at or below this are numerically indistinguishable from 0."""
        return _BETA_DIFF_TOL if self.family == "beta" else 0.0

    def __repr__(self):
        if self.family == "beta":
            return f"ThresholdSpec(beta, alpha={self.alpha}, beta={self.beta})"
        return f"ThresholdSpec({self.family})"


def make_uniform() -> ThresholdSpec:
    return ThresholdSpec("uniform")


def make_exponential_unit() -> ThresholdSpec:
    return ThresholdSpec("exponential")


def make_beta(alpha: float, beta: float) -> ThresholdSpec:
    return ThresholdSpec("beta", alpha=float(alpha), beta=float(beta))


def make_beta_fit_safe(alpha: float, beta: float) -> ThresholdSpec:
    """Beta spec restricted to the log-concave-density region (fitting use)."""
    if alpha < 1.0 or beta < 1.0:
        raise ValueError(
            f"fit-safe beta thresholds require alpha >= 1 and beta >= 1, "
            f"got ({alpha}, {beta})"
        )
    return make_beta(alpha, beta)


def check_concave_cdf(spec: ThresholdSpec) -> bool:
    """Analytic concavity decision for the cdf (no numerical probing)."""
    return spec.concave_cdf


def spec_to_dict(spec: ThresholdSpec) -> dict:
    if spec.family == "beta":
        return {"family": "beta", "alpha": spec.alpha, "beta": spec.beta}
    return {"family": spec.family}


def spec_from_dict(d: dict) -> ThresholdSpec:
    family = d.get("family")
    if family == "uniform":
        return make_uniform()
    if family == "exponential":
        return make_exponential_unit()
    if family == "beta":
        return make_beta(d["alpha"], d["beta"])
    raise ValueError(f"unknown threshold family {family!r}")
