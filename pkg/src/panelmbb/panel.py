"""Balanced panel container and the within-group (fixed-effects) estimator.

The within transformation subtracts unit means from outcomes and regressors,
which eliminates the unit intercepts; least squares on the demeaned data
gives the slope estimate. Unit intercepts are recoverable afterwards from
the unit means if wanted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._kernels import within_cross_products
from .errors import (
    DimensionMismatch,
    NonFiniteValue,
    SingularDesign,
    TooFewPeriods,
    UnbalancedPanel,
)

DEFAULT_RCOND = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, slots=True)
class PanelData:
    """Balanced n x m panel: outcomes ``y`` (n, m) and regressors ``X`` (n, m, k).

    Unit-major, C-contiguous storage: all m periods of a unit are adjacent,
    so block resampling reads contiguous time slices. Arrays are frozen at
    construction; instances are safe to share across threads.
    """

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        if self.y.ndim != 2 or self.X.ndim != 3:
            raise UnbalancedPanel("y must be (n, m) and X must be (n, m, k)")
        if self.X.shape[:2] != self.y.shape:
            raise UnbalancedPanel(
                f"regressor shape {self.X.shape[:2]} does not match outcomes {self.y.shape}"
            )

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def m(self) -> int:
        return self.y.shape[1]

    @property
    def k(self) -> int:
        return self.X.shape[2]

    @classmethod
    def from_arrays(cls, y, X) -> "PanelData":
        """Build a panel from array-likes, copying into the canonical layout.

        A 2-d ``X`` is treated as a single regressor (k = 1).
        """
        y = np.array(y, dtype=np.float64, order="C")
        X = np.array(X, dtype=np.float64, order="C")
        if X.ndim == 2:
            X = X[:, :, None]
        return cls(_freeze(y), _freeze(X))


@dataclass(frozen=True, slots=True)
class WithinFit:
    """Within-group least-squares output.

    ``sigma_hat`` is the demeaned regressor cross-product matrix averaged by
    1/(n m); residuals sum to zero within every unit and are orthogonal to
    the demeaned regressors.
    """

    beta_hat: np.ndarray
    residuals: np.ndarray
    unit_means_y: np.ndarray
    unit_means_x: np.ndarray
    sigma_hat: np.ndarray


@dataclass(frozen=True, slots=True)
class Contrast:
    """Direction c for scalar inference on c'beta."""

    c: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=np.float64))
        if c.ndim != 1:
            raise DimensionMismatch("contrast must be a vector")
        if not np.all(np.isfinite(c)):
            raise NonFiniteValue("contrast has non-finite entries")
        if not np.any(c != 0.0):
            raise DimensionMismatch("contrast must be nonzero")
        object.__setattr__(self, "c", _freeze(c))


def validate_panel(panel: PanelData) -> PanelData:
    """Check the panel invariants, returning the panel unchanged if they hold."""
    n, m, k = panel.n, panel.m, panel.k
    if n < 1 or k < 1:
        raise UnbalancedPanel(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    if m < 2:
        raise TooFewPeriods(
            f"m={m}: demeaning a single period removes all variation"
        )
    if not np.all(np.isfinite(panel.y)):
        raise NonFiniteValue("outcomes contain NaN or infinity")
    if not np.all(np.isfinite(panel.X)):
        raise NonFiniteValue("regressors contain NaN or infinity")
    return panel


def within_transform(panel: PanelData):
    """Demean outcomes and regressors within each unit.

    Returns ``(y_demeaned, X_demeaned, unit_means_y, unit_means_x)``.
    """
    ybar = panel.y.mean(axis=1)
    xbar = panel.X.mean(axis=1)
    yd = panel.y - ybar[:, None]
    Xd = panel.X - xbar[:, None, :]
    return yd, Xd, ybar, xbar


def _solve_normal_equations(S: np.ndarray, v: np.ndarray, rcond: float) -> np.ndarray:
    """Solve S beta = v for symmetric PSD S, rejecting near-singular systems."""
    eigs = np.linalg.eigvalsh(S)
    if eigs[-1] <= 0.0 or eigs[0] <= eigs[-1] * rcond:
        raise SingularDesign(
            "demeaned cross-product matrix is singular or ill-conditioned "
            f"(rcond below {rcond:g}); regressors may be collinear or constant within units"
        )
    try:
        cho = scipy.linalg.cho_factor(S, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - guarded by rcond
        raise SingularDesign(str(exc)) from exc
    return scipy.linalg.cho_solve(cho, v, check_finite=False)


_IDENTITY_IDX_CACHE: dict[int, np.ndarray] = {}


def _identity_index(m: int) -> np.ndarray:
    idx = _IDENTITY_IDX_CACHE.get(m)
    if idx is None:
        idx = _freeze(np.arange(m, dtype=np.int64))
        _IDENTITY_IDX_CACHE[m] = idx
    return idx


def _fit_arrays(y, X, idx, rcond):
    """Core fit on a time-index view of (y, X): beta, unit means, cross products.

    This is the single numerical path for the estimator; the bootstrap calls
    it with gather indices and the plain fit with the identity, so a q = m
    resample reproduces the original estimate bit for bit.
    """
    S, v, ybar, xbar = within_cross_products(y, X, idx)
    beta = _solve_normal_equations(S, v, rcond)
    return beta, ybar, xbar, S


def within_group_estimate(panel: PanelData, rcond: float = DEFAULT_RCOND) -> WithinFit:
    """Within-group least squares: slope, residuals, unit means, sigma_hat.

    Raises SingularDesign when the k x k demeaned cross-product matrix has a
    reciprocal condition number below ``rcond``.
    """
    n, m = panel.n, panel.m
    beta, ybar, xbar, S = _fit_arrays(panel.y, panel.X, _identity_index(m), rcond)
    resid = (panel.y - ybar[:, None]) - (panel.X - xbar[:, None, :]) @ beta
    return WithinFit(
        beta_hat=_freeze(beta),
        residuals=_freeze(resid),
        unit_means_y=_freeze(ybar),
        unit_means_x=_freeze(xbar),
        sigma_hat=_freeze(S / (n * m)),
    )


def recover_fixed_effects(fit: WithinFit) -> np.ndarray:
    """Unit intercept estimates: unit mean of y minus fitted unit mean of x'beta."""
    return fit.unit_means_y - fit.unit_means_x @ fit.beta_hat


def contrast_value(fit: WithinFit, contrast: Contrast) -> float:
    """Point estimate of the scalar c'beta."""
    if contrast.c.shape[0] != fit.beta_hat.shape[0]:
        raise DimensionMismatch(
            f"contrast has length {contrast.c.shape[0]}, model has {fit.beta_hat.shape[0]} slopes"
        )
    return float(contrast.c @ fit.beta_hat)
