import math

import numpy as np
import pytest

from clicktomo import (
    JointDistribution,
    StoppingConfig,
    bootstrap_uncertainty,
    element_ratio,
    fidelity,
    forward_click_probabilities,
    heralded_split_state,
    marginal,
    sample_clicks,
    uniform_grid,
)


class TestMarginal:
    def test_heralded_marginals(self):
        d = heralded_split_state(0.4, 2)
        np.testing.assert_allclose(marginal(d, 0), [0.4, 0.6, 0.0])
        np.testing.assert_allclose(marginal(d, 1), [0.6, 0.4, 0.0])

    def test_brute_force_random(self, rng):
        v = rng.random((4, 4))
        v /= v.sum()
        d = JointDistribution(v)
        for mode in (0, 1):
            expected = np.array([
                sum(v[n, k] if mode == 0 else v[k, n] for k in range(4))
                for n in range(4)
            ])
            np.testing.assert_allclose(marginal(d, mode), expected, atol=1e-14)

    def test_three_mode(self, rng):
        v = rng.random((3, 3, 3))
        v /= v.sum()
        d = JointDistribution(v)
        np.testing.assert_allclose(marginal(d, 1), v.sum(axis=(0, 2)), atol=1e-14)

    def test_mode_out_of_range(self, balanced_state):
        with pytest.raises(IndexError):
            marginal(balanced_state, 2)


class TestFidelity:
    def test_identical(self, rng):
        p = rng.random(8)
        p /= p.sum()
        assert fidelity(p, p) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint(self):
        assert fidelity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_hand_value(self):
        # sqrt(0.9*0.5) + sqrt(0.1*0.5) = 0.8944...
        val = fidelity([0.9, 0.1], [0.5, 0.5])
        assert val == pytest.approx(math.sqrt(0.45) + math.sqrt(0.05), abs=1e-12)

    def test_symmetric(self, rng):
        p = rng.random(6)
        p /= p.sum()
        q = rng.random(6)
        q /= q.sum()
        assert fidelity(p, q) == pytest.approx(fidelity(q, p), abs=1e-14)

    def test_normalize_flag(self):
        assert fidelity([2.0, 0.0], [4.0, 0.0], normalize=True) == pytest.approx(1.0)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            fidelity([1.0, -0.1], [0.5, 0.5])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            fidelity([1.0], [0.5, 0.5])


class TestElementRatio:
    def test_heralded_ratio(self):
        d = heralded_split_state(0.4, 2)
        assert element_ratio(d, (0, 1), (1, 0)) == pytest.approx(2.0 / 3.0)

    def test_zero_denominator(self):
        d = heralded_split_state(0.5, 2)
        with pytest.raises(ZeroDivisionError):
            element_ratio(d, (0, 1), (2, 2))


class TestBootstrap:
    def test_deterministic_record_zero_sigma(self):
        # a vacuum record resamples to itself: all replicates identical
        grid = uniform_grid(4, 0.1, 0.4)
        vac = np.zeros((2, 2))
        vac[0, 0] = 1.0
        probs = forward_click_probabilities(JointDistribution(vac), grid)
        rec = sample_clicks(probs, 1000, seed=0)
        res = bootstrap_uncertainty(
            rec, 1, reps=5, seed=0, options=StoppingConfig(max_iters=200)
        )
        assert res.sigma.max() == pytest.approx(0.0, abs=1e-12)
        assert res.failed == []

    def test_sigma_shrinks_with_statistics(self):
        grid = uniform_grid(6, 0.1, 0.5)
        probs = forward_click_probabilities(heralded_split_state(0.5, 2), grid)
        opts = StoppingConfig(max_iters=2000, min_decrease=None)
        sig = []
        for runs in (2000, 200_000):
            rec = sample_clicks(probs, runs, seed=17)
            res = bootstrap_uncertainty(rec, 2, reps=20, seed=1, options=opts)
            sig.append(res.sigma[0, 1])
        assert sig[1] < sig[0]

    def test_matches_fresh_simulation_spread(self):
        # bootstrap sigma should agree with the spread over independent
        # simulated data sets within a factor of 2
        grid = uniform_grid(6, 0.1, 0.5)
        probs = forward_click_probabilities(heralded_split_state(0.5, 2), grid)
        runs = 20_000
        opts = StoppingConfig(max_iters=3000, min_decrease=None)
        rec = sample_clicks(probs, runs, seed=29)
        res = bootstrap_uncertainty(rec, 2, reps=30, seed=2, options=opts)
        from clicktomo import reconstruct

        finals = []
        for seed in range(30):
            r = sample_clicks(probs, runs, seed=1000 + seed)
            finals.append(reconstruct(r, 2, opts).final.values)
        true_sigma = np.std(np.stack(finals), axis=0, ddof=1)
        # compare on the entries that actually vary
        mask = true_sigma > 1e-4
        assert mask.any()
        ratio = res.sigma[mask] / true_sigma[mask]
        # entrywise within a factor 3, typical entry within a factor 2
        assert np.all(ratio > 1 / 3) and np.all(ratio < 3.0)
        med = float(np.median(ratio))
        assert 0.5 < med < 2.0

    def test_reps_validation(self, small_grid, balanced_state):
        probs = forward_click_probabilities(balanced_state, small_grid)
        rec = sample_clicks(probs, 1000, seed=0)
        with pytest.raises(ValueError):
            bootstrap_uncertainty(rec, 3, reps=1)

    def test_deterministic_in_seed(self):
        grid = uniform_grid(4, 0.1, 0.4)
        probs = forward_click_probabilities(heralded_split_state(0.5, 2), grid)
        rec = sample_clicks(probs, 5000, seed=3)
        opts = StoppingConfig(max_iters=500)
        a = bootstrap_uncertainty(rec, 2, reps=5, seed=9, options=opts)
        b = bootstrap_uncertainty(rec, 2, reps=5, seed=9, options=opts)
        np.testing.assert_array_equal(a.sigma, b.sigma)

    def test_csv_output(self, tmp_path):
        grid = uniform_grid(4, 0.1, 0.4)
        probs = forward_click_probabilities(heralded_split_state(0.5, 1), grid)
        rec = sample_clicks(probs, 5000, seed=3)
        res = bootstrap_uncertainty(
            rec, 1, reps=3, seed=0, options=StoppingConfig(max_iters=200)
        )
        path = tmp_path / "sigma.csv"
        res.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "n1,n2,rho,sigma"
        assert len(lines) == 1 + 4
