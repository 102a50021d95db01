"""Flight power modeling: regression priors and conjugate Bayesian updates.

The average power drawn in each flight regime (takeoff, cruise, landing) is
unknown to the planner. A linear hover-power regression provides a normal
prior per regime; during the mission, periodic power readings inside a
sliding time window update a conjugate Normal-Gamma posterior over the
(mean, precision) of the true average power. The posterior predictive is a
location-scale Student-t whose quantiles turn a confidence level into a
concrete power figure for cost estimation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import betainc

from .instance import REGIMES

__all__ = [
    "RegressionCoefficients",
    "NormalDist",
    "NormalGammaPosterior",
    "Observation",
    "ObservationWindow",
    "DEFAULT_COEFFICIENTS",
    "prior_from_coefficients",
    "default_priors",
    "ng_from_normal",
    "update_posterior",
    "predictive_scale",
    "predictive_quantile",
    "predictive_cdf",
    "student_t_cdf",
    "student_t_quantile",
    "window_push",
]


@dataclass(frozen=True)
class RegressionCoefficients:
    """Hover-power regression terms for one regime, with bootstrap errors.

    ``b1`` multiplies sqrt(mass^3 / air density); ``b0`` is the intercept.
    Both are treated as independent normal variables.
    """

    b1_mean: float
    b1_sd: float
    b0_mean: float
    b0_sd: float

    def __post_init__(self):
        if self.b1_sd < 0 or self.b0_sd < 0:
            raise ValueError("coefficient standard deviations must be nonnegative")


#: Fitted coefficients (value, bootstrap SE) per flight regime.
DEFAULT_COEFFICIENTS: dict[str, RegressionCoefficients] = {
    "takeoff": RegressionCoefficients(80.4, 2.6, 13.8, 18.9),
    "cruise": RegressionCoefficients(68.9, 2.0, 16.8, 15.0),
    "landing": RegressionCoefficients(71.5, 1.7, -24.3, 12.5),
}


@dataclass(frozen=True)
class NormalDist:
    """A normal distribution stored as (mean, variance)."""

    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


def prior_from_coefficients(coef: RegressionCoefficients, m: float, rho: float) -> NormalDist:
    """Normal prior of average power induced by the regression coefficients.

    A linear combination of the independent normal coefficients with the
    deterministic factor sqrt(m^3 / rho) is again normal:
    mean = b1_mean * sqrt(m^3/rho) + b0_mean,
    variance = b1_sd^2 * (m^3/rho) + b0_sd^2.
    """
    if m <= 0 or rho <= 0:
        raise ValueError("mass and air density must be positive")
    factor = m**3 / rho
    return NormalDist(
        mean=coef.b1_mean * math.sqrt(factor) + coef.b0_mean,
        variance=coef.b1_sd**2 * factor + coef.b0_sd**2,
    )


def default_priors(m: float, rho: float,
                   coefficients: dict[str, RegressionCoefficients] | None = None,
                   ) -> dict[str, NormalDist]:
    """Per-regime power priors for a vehicle of mass ``m`` in air density ``rho``."""
    coefficients = coefficients or DEFAULT_COEFFICIENTS
    return {r: prior_from_coefficients(coefficients[r], m, rho) for r in REGIMES}


@dataclass(frozen=True)
class NormalGammaPosterior:
    """Conjugate Normal-Gamma law over (mean, precision) of average power.

    ``mu`` is the location, ``kappa`` the pseudo-observation count backing
    it, and ``alpha_bi``/``beta_bi`` the Gamma shape/rate of the precision.
    """

    mu: float
    kappa: float
    alpha_bi: float
    beta_bi: float

    def __post_init__(self):
        if self.kappa <= 0 or self.alpha_bi <= 0 or self.beta_bi <= 0:
            raise ValueError("kappa, alpha_bi and beta_bi must be positive")

    @property
    def dof(self) -> float:
        """Degrees of freedom of the posterior predictive Student-t."""
        return 2.0 * self.alpha_bi


def ng_from_normal(prior: NormalDist, *, mu: float | None = None, kappa: float = 1.0,
                   alpha_bi: float = 2.0, beta_bi: float | None = None,
                   ) -> NormalGammaPosterior:
    """Weakly informative Normal-Gamma prior centred on a normal power prior.

    Defaults place the location at the prior mean with a single pseudo
    observation and set the precision rate to the prior variance; every
    hyperparameter can be overridden.
    """
    if prior.variance <= 0 and beta_bi is None:
        raise ValueError("prior variance must be positive to seed beta_bi")
    return NormalGammaPosterior(
        mu=prior.mean if mu is None else mu,
        kappa=kappa,
        alpha_bi=alpha_bi,
        beta_bi=prior.variance if beta_bi is None else beta_bi,
    )


def update_posterior(prior: NormalGammaPosterior,
                     samples: Sequence[float] | np.ndarray) -> NormalGammaPosterior:
    """Batch conjugate update of ``prior`` with a set of power samples.

    The update is applied to the full sample set in one shot (not chained),
    so re-running it on the current window contents after old observations
    expire yields the correct posterior for exactly the retained samples.
    With no samples the prior is returned unchanged.
    """
    x = np.asarray(samples, dtype=np.float64)
    n = x.size
    if n == 0:
        return prior
    if x.max() == x.min():
        # constant sample set: the mean is exact and the scatter is zero
        xbar = float(x[0])
        ss = 0.0
    else:
        xbar = float(x.mean())
        ss = float(np.sum((x - xbar) ** 2))
    kappa_n = prior.kappa + n
    # location written in delta form so xbar == mu leaves mu unchanged exactly
    return NormalGammaPosterior(
        mu=prior.mu + n * (xbar - prior.mu) / kappa_n,
        kappa=kappa_n,
        alpha_bi=prior.alpha_bi + n / 2.0,
        beta_bi=prior.beta_bi + 0.5 * ss
        + prior.kappa * n * (xbar - prior.mu) ** 2 / (2.0 * kappa_n),
    )


# ---------------------------------------------------------------------------
# Student-t CDF and quantile via the regularized incomplete beta function.
# ---------------------------------------------------------------------------

def student_t_cdf(x: float, dof: float) -> float:
    """CDF of the standard Student-t with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise ValueError("dof must be positive")
    if x == 0.0:
        return 0.5
    z = dof / (dof + x * x)
    tail = 0.5 * float(betainc(0.5 * dof, 0.5, z))
    return tail if x < 0 else 1.0 - tail


def _student_t_pdf(x: float, dof: float) -> float:
    log_norm = (math.lgamma(0.5 * (dof + 1.0)) - math.lgamma(0.5 * dof)
                - 0.5 * math.log(dof * math.pi))
    return math.exp(log_norm - 0.5 * (dof + 1.0) * math.log1p(x * x / dof))


def student_t_quantile(p: float, dof: float) -> float:
    """Quantile of the standard Student-t, inverted from the CDF.

    Bisection brackets the root, then Newton steps polish it so that
    cdf(quantile(p)) round-trips to ``p`` at ~1e-12 accuracy.
    """
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie strictly between 0 and 1")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -student_t_quantile(1.0 - p, dof)
    lo, hi = 0.0, 1.0
    while student_t_cdf(hi, dof) < p:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            raise ValueError("quantile bracket overflow")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if student_t_cdf(mid, dof) < p:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(3):
        pdf = _student_t_pdf(x, dof)
        if pdf <= 0:
            break
        step = (student_t_cdf(x, dof) - p) / pdf
        x -= step
        if abs(step) < 1e-14 * max(1.0, abs(x)):
            break
    return x


def predictive_scale(post: NormalGammaPosterior) -> float:
    """Scale of the posterior predictive Student-t."""
    return math.sqrt(post.beta_bi * (post.kappa + 1.0) / (post.alpha_bi * post.kappa))


def predictive_quantile(post: NormalGammaPosterior, theta: float) -> float:
    """Power level (W) below which the next reading falls with probability theta."""
    if not (0.0 < theta < 1.0):
        raise ValueError("theta must lie strictly between 0 and 1")
    return post.mu + student_t_quantile(theta, post.dof) * predictive_scale(post)


def predictive_cdf(post: NormalGammaPosterior, x: float) -> float:
    """Probability that the next power reading is at most ``x`` W."""
    return student_t_cdf((x - post.mu) / predictive_scale(post), post.dof)


# ---------------------------------------------------------------------------
# Sliding observation window.
# ---------------------------------------------------------------------------

class Observation(NamedTuple):
    regime: str
    timestamp: float
    power: float


@dataclass(frozen=True)
class ObservationWindow:
    """Time-limited record of power readings, one entry per reading period.

    Only readings taken within ``window_length`` seconds of the newest one
    are retained (the boundary is inclusive). Windows are immutable; pushes
    return a new window.
    """

    observations: tuple[Observation, ...] = ()
    window_length: float = 900.0
    reading_period: float = 20.0

    @property
    def newest(self) -> float | None:
        return self.observations[-1].timestamp if self.observations else None

    def samples(self, regime: str) -> tuple[float, ...]:
        return tuple(o.power for o in self.observations if o.regime == regime)

    def __len__(self) -> int:
        return len(self.observations)


def window_push(win: ObservationWindow, regime: str, timestamp: float,
                avg_power: float) -> ObservationWindow:
    """Append a reading and evict everything older than the window length."""
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    if win.newest is not None and timestamp < win.newest:
        raise ValueError("observation timestamps must be nondecreasing")
    cutoff = timestamp - win.window_length
    kept = tuple(o for o in win.observations if o.timestamp >= cutoff)
    return ObservationWindow(
        observations=kept + (Observation(regime, timestamp, avg_power),),
        window_length=win.window_length,
        reading_period=win.reading_period,
    )
