"""Panel moving block bootstrap.

Time periods are resampled in blocks of q consecutive cross-sections: with
m = p * q, p block start points are drawn i.i.d. uniform on {0, ..., m - q}
and the blocks are concatenated. The same start points apply to every unit,
so cross-sectional dependence between y and its contemporaneous regressors
is never broken. Each bootstrap replicate re-runs the within-group estimator
on the resampled panel.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import variance
from ._kernels import block_score_outer
from .errors import ExcessiveSingularRedraws, IndivisibleBlockLength, InputError, SingularDesign
from .panel import DEFAULT_RCOND, Contrast, PanelData, _fit_arrays, _freeze
from .rng import Stream

_LANE_BOOT = 2
_MAX_PLAN_ATTEMPTS = 64


def valid_block_lengths(m: int) -> list[int]:
    """Block lengths that divide m exactly, ascending."""
    return [q for q in range(1, m + 1) if m % q == 0]


@dataclass(frozen=True, slots=True)
class BlockPlan:
    """Block geometry (p blocks of length q) plus the drawn start indices."""

    p: int
    q: int
    starts: np.ndarray

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise InputError("block counts and lengths must be positive")
        starts = np.asarray(self.starts, dtype=np.int64)
        if starts.shape != (self.p,):
            raise InputError(f"expected {self.p} block starts, got shape {starts.shape}")
        m = self.p * self.q
        if starts.min(initial=0) < 0 or starts.max(initial=0) > m - self.q:
            raise InputError(f"block starts must lie in [0, {m - self.q}]")
        object.__setattr__(self, "starts", _freeze(starts))

    @property
    def m(self) -> int:
        return self.p * self.q

    def time_index(self) -> np.ndarray:
        """Original time positions, length m: block p' maps to starts[p'] + offset."""
        return (self.starts[:, None] + np.arange(self.q, dtype=np.int64)[None, :]).ravel()


def draw_block_plan(m: int, q: int, stream: Stream) -> BlockPlan:
    """Draw p = m/q block starts i.i.d. uniform (inclusive) on {0, ..., m - q}."""
    if m < 1 or q < 1:
        raise InputError("m and q must be positive")
    if m % q != 0:
        raise IndivisibleBlockLength(
            f"block length {q} does not divide m={m}; valid lengths: {valid_block_lengths(m)}"
        )
    p = m // q
    starts = stream.integers(m - q, p)
    return BlockPlan(p=p, q=q, starts=starts)


def resample_panel(panel: PanelData, plan: BlockPlan) -> PanelData:
    """Materialise the bootstrap panel selected by ``plan``.

    Period (p'-1)q + q' of the output copies period starts[p'] + q' of the
    input, jointly for all units.
    """
    if plan.m != panel.m:
        raise InputError(f"plan is for m={plan.m}, panel has m={panel.m}")
    idx = plan.time_index()
    return PanelData(
        _freeze(np.ascontiguousarray(panel.y[:, idx])),
        _freeze(np.ascontiguousarray(panel.X[:, idx, :])),
    )


@dataclass(frozen=True, slots=True)
class BootstrapRun:
    """B bootstrap slope estimates, optionally with studentising scales.

    ``beta_stars`` is (B, k); ``sigma_stars``, when present, holds the
    bootstrap standard deviation of the requested contrast per replicate.
    Identical (data, geometry, seed, B) give identical contents regardless
    of thread count.
    """

    B: int
    beta_stars: np.ndarray
    sigma_stars: np.ndarray | None
    seed: int
    plan_geometry: tuple[int, int]
    n_redraws: int = 0


def bootstrap_distribution(
    panel: PanelData,
    q: int,
    B: int,
    seed: int,
    *,
    contrast: Contrast | None = None,
    studentize: bool = False,
    threads: int = 1,
    rcond: float = DEFAULT_RCOND,
    max_singular_fraction: float = 0.1,
) -> BootstrapRun:
    """Generate the bootstrap distribution of the within-group estimator.

    Replicate b draws its block plan from the substream keyed by
    (seed, b, attempt): results are a pure function of (data, q, B, seed)
    and are merged in replicate order, so any thread count produces the
    same run. Replicates whose resample has a singular design are redrawn
    from the next attempt substream; if more than ``max_singular_fraction``
    of replicates needed a redraw the run aborts.

    With ``studentize=True`` each replicate also computes the block-score
    sandwich variance on its own plan and stores the standard deviation of
    the requested contrast (default: first coordinate).
    """
    n, m, k = panel.n, panel.m, panel.k
    if B < 1:
        raise InputError("B must be at least 1")
    if m % q != 0:
        raise IndivisibleBlockLength(
            f"block length {q} does not divide m={m}; valid lengths: {valid_block_lengths(m)}"
        )
    p = m // q
    if contrast is None:
        e1 = np.zeros(k)
        e1[0] = 1.0
        contrast = Contrast(e1)
    offsets = np.arange(q, dtype=np.int64)

    def one_replicate(b: int):
        redraws = 0
        for attempt in range(_MAX_PLAN_ATTEMPTS):
            stream = Stream(seed, (b, attempt, _LANE_BOOT))
            starts = stream.integers(m - q, p)
            idx = (starts[:, None] + offsets[None, :]).ravel()
            try:
                beta, ybar, xbar, S = _fit_arrays(panel.y, panel.X, idx, rcond)
            except SingularDesign:
                redraws += 1
                continue
            sigma_star = None
            if studentize:
                omega = block_score_outer(
                    panel.y, panel.X, starts, q, ybar, xbar, beta
                ) / (n * p)
                ups = variance.upsilon(S / (n * m), omega, rcond=rcond)
                sigma_star = float(np.sqrt(variance.contrast_variance(ups, contrast)))
            return beta, sigma_star, redraws
        raise ExcessiveSingularRedraws(
            f"replicate {b}: {_MAX_PLAN_ATTEMPTS} consecutive singular resamples"
        )

    if threads <= 1:
        results = [one_replicate(b) for b in range(B)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one_replicate, range(B), chunksize=max(1, B // (4 * threads))))

    beta_stars = np.vstack([r[0] for r in results])
    sigma_stars = np.array([r[1] for r in results]) if studentize else None
    hit = sum(1 for r in results if r[2] > 0)
    if hit > max_singular_fraction * B:
        raise ExcessiveSingularRedraws(
            f"{hit} of {B} replicates hit a singular design (limit {max_singular_fraction:.0%})"
        )
    return BootstrapRun(
        B=B,
        beta_stars=_freeze(beta_stars),
        sigma_stars=_freeze(sigma_stars) if sigma_stars is not None else None,
        seed=seed,
        plan_geometry=(p, q),
        n_redraws=sum(r[2] for r in results),
    )
