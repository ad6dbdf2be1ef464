"""Bootstrap quantiles, confidence intervals, bias correction, and tests.

All constructions share one quantile operator: the smallest sample value at
which the empirical CDF reaches the requested level. Two-sided intervals are
equal-tailed (the bootstrap distribution is deliberately off-centre, so a
symmetric construction would waste its bias information), and the reverse
form theta_hat - Q is used throughout so that the bootstrap's replication of
the sampling distribution, bias included, carries over to coverage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import EmptyRun, InputError, MissingStudentization, ZeroVariance
from .mbb import BootstrapRun
from .normal import norm_ppf
from .panel import Contrast, WithinFit, contrast_value

SIDES = ("two_sided", "lower", "upper")
METHODS = ("reverse_percentile", "studentized", "normal_approx")


@dataclass(frozen=True, slots=True)
class InferenceReport:
    """Point estimates and confidence intervals for one contrast and method.

    ``alpha_levels`` are miscoverage levels (0.10 means a 90% interval);
    ``ci_lower``/``ci_upper`` are aligned with them.
    """

    theta_hat: float
    theta_checked: float
    sigma_hat: float | None
    method: str
    alpha_levels: tuple[float, ...]
    ci_lower: tuple[float, ...]
    ci_upper: tuple[float, ...]
    B: int

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"unknown method {self.method!r}")
        for lo, hi in zip(self.ci_lower, self.ci_upper):
            if lo > hi:
                raise InputError("interval endpoints are reversed")


@dataclass(frozen=True, slots=True)
class HypothesisTest:
    theta_null: float
    p_value: float
    reject: bool
    alpha: float
    method: str


def bootstrap_quantile(deltas, alpha: float) -> float:
    """Smallest sample value at which the empirical CDF reaches ``alpha``.

    Equals the order statistic of rank ceil(alpha * B). The rank is computed
    in exact rational arithmetic so a float rounding of alpha * B can never
    shift it off the inf-definition.
    """
    deltas = np.asarray(deltas, dtype=np.float64).ravel()
    B = deltas.size
    if B == 0:
        raise EmptyRun("no bootstrap replicates")
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    rank = math.ceil(Fraction(alpha) * B)
    return float(np.sort(deltas)[rank - 1])


def contrast_deltas(run: BootstrapRun, theta_hat: float, contrast: Contrast) -> np.ndarray:
    """Replicate-wise theta* - theta_hat for the given contrast."""
    if run.beta_stars.shape[0] == 0:
        raise EmptyRun("bootstrap run holds no replicates")
    return run.beta_stars @ contrast.c - theta_hat


def _tail_quantiles(sample: np.ndarray, alpha: float, side: str):
    if side not in SIDES:
        raise InputError(f"side must be one of {SIDES}")
    if side == "two_sided":
        return bootstrap_quantile(sample, 1.0 - alpha / 2.0), bootstrap_quantile(sample, alpha / 2.0)
    if side == "lower":
        return bootstrap_quantile(sample, 1.0 - alpha), None
    return None, bootstrap_quantile(sample, alpha)


def reverse_percentile_ci(
    theta_hat: float,
    run: BootstrapRun,
    contrast: Contrast,
    alpha: float,
    side: str = "two_sided",
) -> tuple[float, float]:
    """Equal-tailed reverse-percentile interval at miscoverage ``alpha``.

    Two-sided: [theta_hat - Q(1 - alpha/2), theta_hat - Q(alpha/2)] built
    from the bootstrap deltas. One-sided variants drop the corresponding
    tail to +/- infinity.
    """
    deltas = contrast_deltas(run, theta_hat, contrast)
    q_hi, q_lo = _tail_quantiles(deltas, alpha, side)
    lower = theta_hat - q_hi if q_hi is not None else -math.inf
    upper = theta_hat - q_lo if q_lo is not None else math.inf
    return lower, upper


def studentized_ci(
    theta_hat: float,
    sigma_hat: float,
    run: BootstrapRun,
    contrast: Contrast,
    alpha: float,
    side: str = "two_sided",
) -> tuple[float, float]:
    """Reverse-percentile interval on studentised deltas, rescaled by sigma_hat."""
    if run.sigma_stars is None:
        raise MissingStudentization(
            "bootstrap run was generated without studentize=True"
        )
    if not sigma_hat > 0.0:
        raise ZeroVariance(f"sigma_hat must be positive, got {sigma_hat}")
    if not np.all(run.sigma_stars > 0.0):
        raise ZeroVariance("some bootstrap replicates have zero variance")
    deltas = contrast_deltas(run, theta_hat, contrast) / run.sigma_stars
    q_hi, q_lo = _tail_quantiles(deltas, alpha, side)
    lower = theta_hat - sigma_hat * q_hi if q_hi is not None else -math.inf
    upper = theta_hat - sigma_hat * q_lo if q_lo is not None else math.inf
    return lower, upper


def bias_corrected_estimate(fit: WithinFit, run: BootstrapRun) -> np.ndarray:
    """Slope estimate minus the coordinate-wise bootstrap median of beta* - beta."""
    if run.beta_stars.shape[0] == 0:
        raise EmptyRun("bootstrap run holds no replicates")
    medians = np.array(
        [
            bootstrap_quantile(run.beta_stars[:, j] - fit.beta_hat[j], 0.5)
            for j in range(fit.beta_hat.shape[0])
        ]
    )
    return fit.beta_hat - medians


def linear_hypothesis_test(
    theta_null: float,
    theta_hat: float,
    run: BootstrapRun,
    contrast: Contrast,
    alpha: float = 0.05,
    method: str = "reverse_percentile",
    sigma_hat: float | None = None,
) -> HypothesisTest:
    """Two-sided bootstrap test of theta = theta_null.

    The p-value is 2 * min(F(t), 1 - F(t-)) with F the empirical CDF of the
    (optionally studentised) deltas and t the (optionally studentised)
    discrepancy theta_hat - theta_null; rejection at p < alpha inverts the
    equal-tailed interval of the same method up to rank discreteness.
    """
    deltas = contrast_deltas(run, theta_hat, contrast)
    t = theta_hat - theta_null
    if method == "studentized":
        if run.sigma_stars is None:
            raise MissingStudentization("run has no sigma_stars")
        if sigma_hat is None or not sigma_hat > 0.0:
            raise ZeroVariance("studentized test needs a positive sigma_hat")
        if not np.all(run.sigma_stars > 0.0):
            raise ZeroVariance("some bootstrap replicates have zero variance")
        deltas = deltas / run.sigma_stars
        t = t / sigma_hat
    elif method != "reverse_percentile":
        raise InputError(f"unknown test method {method!r}")
    B = deltas.size
    cdf_at = np.count_nonzero(deltas <= t) / B
    cdf_below = np.count_nonzero(deltas < t) / B
    p = min(1.0, 2.0 * min(cdf_at, 1.0 - cdf_below))
    return HypothesisTest(
        theta_null=theta_null, p_value=p, reject=p < alpha, alpha=alpha, method=method
    )


def normal_approx_ci(
    theta_checked: float, sigma_hat: float, nm: int, alpha: float
) -> tuple[float, float]:
    """Normal interval around the bias-corrected estimate.

    The critical value is the standard normal quantile from the package's
    rational approximation (absolute error well under 1e-8).
    """
    if not sigma_hat > 0.0:
        raise ZeroVariance(f"sigma_hat must be positive, got {sigma_hat}")
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    half = norm_ppf(1.0 - alpha / 2.0) * sigma_hat / math.sqrt(nm)
    return theta_checked - half, theta_checked + half


def inference_report(
    method: str,
    fit: WithinFit,
    run: BootstrapRun,
    contrast: Contrast,
    alphas,
    sigma_hat: float | None = None,
    nm: int | None = None,
) -> InferenceReport:
    """Bundle point estimates and the CIs of one method at several levels."""
    theta_hat = contrast_value(fit, contrast)
    theta_checked = float(contrast.c @ bias_corrected_estimate(fit, run))
    alphas = tuple(float(a) for a in alphas)
    lowers, uppers = [], []
    for a in alphas:
        if method == "reverse_percentile":
            lo, hi = reverse_percentile_ci(theta_hat, run, contrast, a)
        elif method == "studentized":
            if sigma_hat is None:
                raise ZeroVariance("studentized report needs sigma_hat")
            lo, hi = studentized_ci(theta_hat, sigma_hat, run, contrast, a)
        elif method == "normal_approx":
            if sigma_hat is None or nm is None:
                raise InputError("normal_approx report needs sigma_hat and nm")
            lo, hi = normal_approx_ci(theta_checked, sigma_hat, nm, a)
        else:
            raise InputError(f"unknown method {method!r}")
        lowers.append(lo)
        uppers.append(hi)
    return InferenceReport(
        theta_hat=theta_hat,
        theta_checked=theta_checked,
        sigma_hat=sigma_hat,
        method=method,
        alpha_levels=alphas,
        ci_lower=tuple(lowers),
        ci_upper=tuple(uppers),
        B=run.B,
    )
