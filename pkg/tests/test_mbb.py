import math

import numpy as np
import pytest

from panelmbb import (
    Ar1Design,
    BlockPlan,
    ExcessiveSingularRedraws,
    IndivisibleBlockLength,
    PanelData,
    Stream,
    bootstrap_distribution,
    draw_block_plan,
    resample_panel,
    simulate_ar1,
    valid_block_lengths,
    within_group_estimate,
)


def test_valid_block_lengths():
    assert valid_block_lengths(12) == [1, 2, 3, 4, 6, 12]


class TestDrawBlockPlan:
    def test_full_length_block_is_forced_to_zero(self):
        for seed in range(5):
            plan = draw_block_plan(4, 4, Stream(seed))
            assert plan.p == 1
            assert plan.starts.tolist() == [0]

    def test_indivisible_length_rejected(self):
        with pytest.raises(IndivisibleBlockLength):
            draw_block_plan(5, 2, Stream(0))

    def test_starts_uniform_on_support(self):
        # m=4, q=2: starts live on {0,1,2}; frequencies ~ 1/3 over 30000 draws
        stream = Stream(2024)
        draws = np.concatenate([draw_block_plan(4, 2, stream).starts for _ in range(15_000)])
        assert draws.size == 30_000
        freqs = np.bincount(draws, minlength=3) / draws.size
        assert np.all(np.abs(freqs - 1.0 / 3.0) < 0.02)

    def test_plan_invariants_enforced(self):
        with pytest.raises(Exception):
            BlockPlan(p=2, q=2, starts=np.array([0, 3]))  # start beyond m - q


class TestResamplePanel:
    def test_identity_when_single_full_block(self):
        rng = np.random.RandomState(0)
        panel = PanelData.from_arrays(rng.randn(3, 4), rng.randn(3, 4, 2))
        plan = BlockPlan(p=1, q=4, starts=np.array([0]))
        out = resample_panel(panel, plan)
        assert np.array_equal(out.y, panel.y)
        assert np.array_equal(out.X, panel.X)

    def test_index_arithmetic(self):
        # starts (1,2) with q=2 pick original periods (2,3,3,4) in 1-based terms
        y = np.array([[10.0, 20.0, 30.0, 40.0]])
        panel = PanelData.from_arrays(y, y.copy())
        plan = BlockPlan(p=2, q=2, starts=np.array([1, 2]))
        out = resample_panel(panel, plan)
        assert out.y.tolist() == [[20.0, 30.0, 30.0, 40.0]]

    def test_pairs_never_decoupled(self):
        rng = np.random.RandomState(5)
        panel = PanelData.from_arrays(rng.randn(4, 6), rng.randn(4, 6, 1))
        for seed in range(10):
            plan = draw_block_plan(6, 2, Stream(seed))
            out = resample_panel(panel, plan)
            for i in range(panel.n):
                originals = {(panel.y[i, t], panel.X[i, t, 0]) for t in range(panel.m)}
                for t in range(panel.m):
                    assert (out.y[i, t], out.X[i, t, 0]) in originals


class TestBootstrapDistribution:
    def test_identity_block_reproduces_estimate_bitwise(self):
        panel = simulate_ar1(Ar1Design(beta=0.3, n=6, m=8, seed=1))
        fit = within_group_estimate(panel)
        run = bootstrap_distribution(panel, q=8, B=7, seed=5)
        for b in range(run.B):
            assert np.array_equal(run.beta_stars[b], fit.beta_hat)
        assert np.ptp(run.beta_stars) == 0.0

    def test_zero_noise_panel_gives_true_slope(self):
        rng = np.random.RandomState(8)
        X = rng.randn(5, 6, 1)
        y = 1.5 + X[:, :, 0] * 2.0
        panel = PanelData.from_arrays(y, X)
        run = bootstrap_distribution(panel, q=2, B=25, seed=3)
        assert np.allclose(run.beta_stars, 2.0, atol=1e-10)

    def test_thread_count_invariance(self):
        panel = simulate_ar1(Ar1Design(beta=0.0, n=10, m=12, seed=9))
        runs = [
            bootstrap_distribution(panel, q=3, B=40, seed=17, threads=t, studentize=True)
            for t in (1, 2, 8)
        ]
        for other in runs[1:]:
            assert np.array_equal(runs[0].beta_stars, other.beta_stars)
            assert np.array_equal(runs[0].sigma_stars, other.sigma_stars)

    def test_same_seed_reproduces(self):
        panel = simulate_ar1(Ar1Design(beta=0.5, n=7, m=6, seed=2))
        a = bootstrap_distribution(panel, q=2, B=31, seed=77)
        b = bootstrap_distribution(panel, q=2, B=31, seed=77)
        assert np.array_equal(a.beta_stars, b.beta_stars)
        c = bootstrap_distribution(panel, q=2, B=31, seed=78)
        assert not np.array_equal(a.beta_stars, c.beta_stars)

    def test_singular_resamples_are_redrawn(self):
        # regressor varies in a single period: plans that miss it are singular
        y = np.array([[0.0, 1.0, 0.5, 0.25]])
        X = np.array([[0.0, 0.0, 0.0, 1.0]])
        panel = PanelData.from_arrays(y, X)
        run = bootstrap_distribution(panel, q=1, B=40, seed=4, max_singular_fraction=1.0)
        assert run.n_redraws > 0
        assert np.all(np.isfinite(run.beta_stars))

    def test_excessive_singular_rate_aborts(self):
        y = np.array([[0.0, 1.0, 0.5, 0.25]])
        X = np.array([[0.0, 0.0, 0.0, 1.0]])
        panel = PanelData.from_arrays(y, X)
        with pytest.raises(ExcessiveSingularRedraws):
            bootstrap_distribution(panel, q=1, B=40, seed=4)

    def test_indivisible_q_rejected_with_divisors(self):
        panel = simulate_ar1(Ar1Design(beta=0.0, n=4, m=6, seed=0))
        with pytest.raises(IndivisibleBlockLength, match=r"\[1, 2, 3, 6\]"):
            bootstrap_distribution(panel, q=4, B=5, seed=0)

    def test_replicates_mean_tracks_limit_bias(self):
        # AR(1) at n=m=200, q=10: the scaled bootstrap mean should sit near the
        # -sqrt(n/m)(1+beta) = -1 limit bias. A single dataset's value has
        # s.d. ~0.14 around a centre attenuated by the finite block length, so
        # the +-0.15 band is checked on the average over 30 datasets.
        means = []
        for ds in range(30):
            panel = simulate_ar1(Ar1Design(beta=0.0, n=200, m=200, seed=1000 + ds))
            fit = within_group_estimate(panel)
            run = bootstrap_distribution(panel, q=10, B=399, seed=2000 + ds, threads=2)
            scaled = math.sqrt(200 * 200) * (run.beta_stars[:, 0] - fit.beta_hat[0])
            means.append(scaled.mean())
        assert np.mean(means) == pytest.approx(-1.0, abs=0.15)
