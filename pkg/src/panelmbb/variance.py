"""Long-run variance estimation and the sandwich for the scaled estimator.

Three routes to the long-run score variance are provided: the block-score
average computed on a drawn resample, a deterministic closed form that
averages block scores over every admissible block position, and a plug-in
HAC estimate with Bartlett weights. Each feeds the same sandwich
``sigma^-1 omega sigma^-1`` whose contrast quadratic form is the variance
used for studentisation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._kernels import block_score_outer, within_cross_products
from .errors import (
    DimensionMismatch,
    IndivisibleBlockLength,
    InputError,
    NegativeVariance,
    SingularDesign,
)
from .panel import DEFAULT_RCOND, Contrast, PanelData, WithinFit, _freeze, _identity_index

PSD_TOLERANCE = -1e-10

METHODS = ("resampled_star", "closed_form_star", "plug_in_hac")


@dataclass(frozen=True, slots=True)
class VarianceEstimates:
    """A matched triple (sigma, omega, upsilon) with the method that built it."""

    sigma: np.ndarray
    omega: np.ndarray
    upsilon: np.ndarray
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"unknown variance method {self.method!r}; choose from {METHODS}")


def sigma_hat(panel: PanelData) -> np.ndarray:
    """Demeaned regressor cross products averaged by 1/(n m)."""
    S, _, _, _ = within_cross_products(panel.y, panel.X, _identity_index(panel.m))
    return S / (panel.n * panel.m)


def omega_star_resampled(panel: PanelData, plan, fit_star: WithinFit) -> np.ndarray:
    """Block-score outer products averaged over units and drawn blocks.

    The scores use the original observations at the drawn block positions,
    centred at the resampled-panel means, with the resampled-panel slope
    (all taken from ``fit_star``).
    """
    n = panel.n
    out = block_score_outer(
        panel.y,
        panel.X,
        plan.starts,
        plan.q,
        fit_star.unit_means_y,
        fit_star.unit_means_x,
        fit_star.beta_hat,
    )
    return out / (n * plan.p)


def omega_star_closed_form(panel: PanelData, fit: WithinFit, q: int) -> np.ndarray:
    """Resampling-free bootstrap score variance.

    Averages, over all m - q + 1 admissible block positions, the outer
    products of the scaled block score sums built from the original demeaned
    regressors and residuals, subtracts the outer product of their mean, and
    averages over units. Replacing the resampled-panel means with the
    full-sample means makes the score block-separable; the gap to the exact
    conditional resampling variance is O(q/m) and is quantified by the
    enumeration tests.
    """
    n, m, k = panel.n, panel.m, panel.k
    if m % q != 0:
        raise IndivisibleBlockLength(f"block length {q} does not divide m={m}")
    scores = (panel.X - fit.unit_means_x[:, None, :]) * fit.residuals[:, :, None]
    cs = np.concatenate([np.zeros((n, 1, k)), np.cumsum(scores, axis=1)], axis=1)
    U = (cs[:, q:, :] - cs[:, : m - q + 1, :]) / np.sqrt(q)  # (n, m-q+1, k)
    T = m - q + 1
    second = np.einsum("itk,itl->ikl", U, U) / T
    Ubar = U.mean(axis=1)
    per_unit = second - np.einsum("ik,il->ikl", Ubar, Ubar)
    return per_unit.mean(axis=0)


def omega_plug_in_hac(panel: PanelData, fit: WithinFit, bandwidth: int) -> np.ndarray:
    """HAC estimate: lag-0 score outer products plus Bartlett-weighted lags.

    Lag tau gets weight 1 - tau/(bandwidth + 1) on the symmetrised
    cross-product of scores tau periods apart, summed within units.
    """
    n, m, _ = panel.n, panel.m, panel.k
    if not 0 <= bandwidth < m:
        raise InputError(f"bandwidth must be in [0, m), got {bandwidth} with m={m}")
    scores = (panel.X - fit.unit_means_x[:, None, :]) * fit.residuals[:, :, None]
    omega = np.einsum("itk,itl->kl", scores, scores)
    for tau in range(1, bandwidth + 1):
        weight = 1.0 - tau / (bandwidth + 1.0)
        gamma = np.einsum("itk,itl->kl", scores[:, : m - tau, :], scores[:, tau:, :])
        omega += weight * (gamma + gamma.T)
    return omega / (n * m)


def upsilon(sigma: np.ndarray, omega: np.ndarray, rcond: float = DEFAULT_RCOND) -> np.ndarray:
    """Sandwich sigma^-1 omega sigma^-1, symmetrised."""
    sigma = np.asarray(sigma, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    if sigma.shape != omega.shape or sigma.shape[0] != sigma.shape[1]:
        raise DimensionMismatch(f"incompatible shapes {sigma.shape} and {omega.shape}")
    eigs = np.linalg.eigvalsh(sigma)
    if eigs[-1] <= 0.0 or eigs[0] <= eigs[-1] * rcond:
        raise SingularDesign(f"sigma is singular at rcond {rcond:g}")
    cho = scipy.linalg.cho_factor(sigma, lower=True, check_finite=False)
    inner = scipy.linalg.cho_solve(cho, omega, check_finite=False)
    ups = scipy.linalg.cho_solve(cho, inner.T, check_finite=False)
    return (ups + ups.T) / 2.0


def contrast_variance(ups: np.ndarray, contrast: Contrast) -> float:
    """Quadratic form c' upsilon c, clamped at zero within rounding tolerance."""
    c = contrast.c
    if c.shape[0] != ups.shape[0]:
        raise DimensionMismatch(f"contrast length {c.shape[0]} vs matrix size {ups.shape[0]}")
    value = float(c @ ups @ c)
    if value < PSD_TOLERANCE:
        raise NegativeVariance(f"contrast variance {value:g} is negative beyond tolerance")
    return max(value, 0.0)


def psd_clamp(mat: np.ndarray, tol: float = PSD_TOLERANCE) -> np.ndarray:
    """Zero out rounding-level negative eigenvalues; reject anything worse."""
    mat = (mat + mat.T) / 2.0
    eigs, vecs = np.linalg.eigh(mat)
    if eigs[0] < tol:
        raise NegativeVariance(f"eigenvalue {eigs[0]:g} below PSD tolerance {tol:g}")
    if eigs[0] >= 0.0:
        return mat
    eigs = np.maximum(eigs, 0.0)
    return (vecs * eigs) @ vecs.T


def variance_estimates(
    panel: PanelData,
    fit: WithinFit,
    method: str,
    *,
    q: int | None = None,
    bandwidth: int | None = None,
    plan=None,
    fit_star: WithinFit | None = None,
    rcond: float = DEFAULT_RCOND,
) -> VarianceEstimates:
    """Assemble a (sigma, omega, upsilon) triple for the requested method."""
    if method == "resampled_star":
        if plan is None or fit_star is None:
            raise InputError("resampled_star requires a plan and the resampled fit")
        sig = fit_star.sigma_hat
        omg = omega_star_resampled(panel, plan, fit_star)
    elif method == "closed_form_star":
        if q is None:
            raise InputError("closed_form_star requires the block length q")
        sig = fit.sigma_hat
        omg = omega_star_closed_form(panel, fit, q)
    elif method == "plug_in_hac":
        if bandwidth is None:
            raise InputError("plug_in_hac requires a bandwidth")
        sig = fit.sigma_hat
        omg = omega_plug_in_hac(panel, fit, bandwidth)
    else:
        raise InputError(f"unknown variance method {method!r}; choose from {METHODS}")
    omg = psd_clamp(omg)
    ups = psd_clamp(upsilon(sig, omg, rcond=rcond))
    return VarianceEstimates(
        sigma=_freeze(np.array(sig)), omega=_freeze(omg), upsilon=_freeze(ups), method=method
    )
