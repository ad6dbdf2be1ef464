"""Data-generating processes and the analytic limit-law oracle.

The main design is a stationary first-order autoregression with
standard-normal innovations where the regressor is the lagged outcome, the
canonical case in which the within-group estimator carries an O(1/m) bias.
A small menu of generic linear designs covers test fixtures, and the
first-order theory (bias coefficient, limit mean and spread of the scaled
estimator) is available in closed form for validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, NonStationary, UnknownSpec
from .panel import PanelData
from .rng import Stream

_LANE_SIM = 1

LINEAR_SPECS = ("iid", "feedback", "zero_noise")


@dataclass(frozen=True, slots=True)
class Ar1Design:
    """Stationary AR(1) panel design: y_it = beta * y_it-1 + eps_it, unit effects zero."""

    beta: float
    n: int
    m: int
    seed: int

    def __post_init__(self):
        if not abs(self.beta) < 1.0:
            raise NonStationary(f"|beta| must be below 1, got {self.beta}")
        if self.n < 1 or self.m < 2:
            raise UnknownSpec(f"need n >= 1 and m >= 2, got n={self.n}, m={self.m}")


@dataclass(frozen=True, slots=True)
class LimitLaw:
    """First two moments of the limit distribution of sqrt(nm)(beta_hat - beta)."""

    mean: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0.0:
            raise UnknownSpec(f"limit s.d. must be positive, got {self.sd}")


def simulate_ar1(design: Ar1Design) -> PanelData:
    """Simulate the AR(1) design; k = 1 with the lagged outcome as regressor.

    Draw order is fixed (innovation matrix first, then the stationary
    initial states), so a seed pins the dataset bytes.
    """
    n, m, beta = design.n, design.m, design.beta
    stream = Stream(design.seed, (0, 0, _LANE_SIM))
    eps = stream.normals(n * m).reshape(n, m)
    x0 = stream.normals(n) * math.sqrt(1.0 / (1.0 - beta * beta))
    x = np.empty((n, m))
    y = np.empty((n, m))
    x[:, 0] = x0
    y[:, 0] = x0 * beta + eps[:, 0]
    for t in range(1, m):
        x[:, t] = y[:, t - 1]
        y[:, t] = x[:, t] * beta + eps[:, t]
    return PanelData.from_arrays(y, x)


def simulate_linear(
    n: int,
    m: int,
    k: int,
    beta,
    spec: str = "iid",
    seed: int = 0,
    alpha_sd: float = 1.0,
) -> PanelData:
    """Balanced panel from a fixed menu of linear designs.

    ``iid``: independent standard-normal regressors and errors, unit effects
    N(0, alpha_sd^2). ``feedback``: scalar autoregression with unit effects,
    stationary start (the regressor is the lagged outcome, so errors feed
    back into future regressors). ``zero_noise``: iid regressors, no error
    term; the within-group fit recovers beta exactly.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    if beta.shape != (k,):
        raise DimensionMismatch(f"beta must have length k={k}, got {beta.shape}")
    stream = Stream(seed, (0, 0, _LANE_SIM))
    if spec == "iid":
        X = stream.normals(n * m * k).reshape(n, m, k)
        alpha = stream.normals(n) * alpha_sd
        eps = stream.normals(n * m).reshape(n, m)
        y = alpha[:, None] + X @ beta + eps
        return PanelData.from_arrays(y, X)
    if spec == "zero_noise":
        X = stream.normals(n * m * k).reshape(n, m, k)
        alpha = stream.normals(n) * alpha_sd
        y = alpha[:, None] + X @ beta
        return PanelData.from_arrays(y, X)
    if spec == "feedback":
        if k != 1:
            raise DimensionMismatch("feedback design is scalar: k must be 1")
        b = float(beta[0])
        if not abs(b) < 1.0:
            raise NonStationary(f"|beta| must be below 1 for the feedback design, got {b}")
        alpha = stream.normals(n) * alpha_sd
        eps = stream.normals(n * m).reshape(n, m)
        x0 = alpha / (1.0 - b) + stream.normals(n) * math.sqrt(1.0 / (1.0 - b * b))
        x = np.empty((n, m))
        y = np.empty((n, m))
        x[:, 0] = x0
        y[:, 0] = alpha + b * x0 + eps[:, 0]
        for t in range(1, m):
            x[:, t] = y[:, t - 1]
            y[:, t] = alpha + b * x[:, t] + eps[:, t]
        return PanelData.from_arrays(y, x)
    raise UnknownSpec(f"unknown design {spec!r}; choose from {LINEAR_SPECS}")


def ar1_limit_law(beta: float, n: int, m: int) -> LimitLaw:
    """Limit mean and s.d. of sqrt(nm)(beta_hat - beta) in the AR(1) design.

    Mean -sqrt(n/m)(1 + beta); s.d. sqrt(1/(1 - beta^2)). At beta = 0 the
    law is N(-sqrt(n/m), 1).
    """
    if not abs(beta) < 1.0:
        raise NonStationary(f"|beta| must be below 1, got {beta}")
    return LimitLaw(
        mean=-math.sqrt(n / m) * (1.0 + beta),
        sd=math.sqrt(1.0 / (1.0 - beta * beta)),
    )


@dataclass(frozen=True, slots=True)
class CrossMoments:
    """Analytic cross moments of centred regressors and errors at lags tau >= 1.

    ``lead(tau)`` is E(z_t eps_{t+tau}); ``lag(tau)`` is E(z_{t+tau} eps_t);
    both return k-vectors.
    """

    k: int
    lead: Callable[[int], np.ndarray]
    lag: Callable[[int], np.ndarray]


def cross_moments(name: str, **params) -> CrossMoments:
    """Moment menu for the bias formula.

    ``ar1``: E(z_t eps_{t+tau}) = 0 and E(z_{t+tau} eps_t) = beta^(tau-1) sigma2.
    ``strict``: strictly exogenous, all cross moments zero (k from params).
    """
    if name == "ar1":
        beta = float(params.get("beta", 0.0))
        sigma2 = float(params.get("sigma2", 1.0))
        return CrossMoments(
            k=1,
            lead=lambda tau: np.zeros(1),
            lag=lambda tau: np.array([beta ** (tau - 1) * sigma2]),
        )
    if name == "strict":
        k = int(params.get("k", 1))
        return CrossMoments(k=k, lead=lambda tau: np.zeros(k), lag=lambda tau: np.zeros(k))
    raise UnknownSpec(f"unknown moment spec {name!r}; choose 'ar1' or 'strict'")


def theoretical_bias_b(moments: CrossMoments, m: int) -> np.ndarray:
    """Finite-sample bias coefficient by direct summation over lags 1..m-1.

    Returns minus the weighted sum of the lead and lag cross moments with
    weights (m - tau)/m; the bias of the scaled estimator is then
    sigma^-1 b / m per period.
    """
    total = np.zeros(moments.k)
    for tau in range(1, m):
        total += (m - tau) / m * (moments.lead(tau) + moments.lag(tau))
    return -total
