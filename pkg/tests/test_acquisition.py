"""Acquisition correctness: closed-form gain values frozen from a
high-precision evaluation, log-domain stability in the deep tail, and
Monte-Carlo / gradient agreement with a deterministic quadrature oracle."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from helpers import central_diff, rel_err, random_state
from ikg import (
    AcquisitionSample,
    BeliefState,
    BoxDomain,
    GpPosterior,
    Kernel,
    ikg_gradient_batch,
    ikg_gradient_sample,
    ikg_quadrature_reference,
    kg_gain,
    log_ikg_estimate,
    pointwise_kg,
    posterior_mean_gap,
)
from ikg.acquisition import _mills_ratio
from ikg.experiments import CovariateDensity

# Gain values from a 40-digit evaluation of t*pdf(s/t) - s*cdf(-s/t).
PHI0 = 0.3989422804014327
GAIN_1_1 = 0.0833154705876863
GAIN_2_1 = 0.008490702616829637
GAIN_1_2 = 0.39559311480261206
GAIN_HALF_2 = 0.5726893964471603
GAIN_3_QUARTER = 3.651300292461387e-35
GAIN_30_1 = 1.631956734091401e-199
HALF_INV_SQRT_PI = 0.28209479177387814  # pdf(0)/sqrt(2)
MILLS_20_EXACT = 0.04987592598183679


def se_kernel(d: int = 1, tau_sq: float = 1.0, alpha: float = 1.0) -> Kernel:
    return Kernel("se", tau_sq, np.full(d, alpha))


def const(value: float):
    return lambda x: value


class TestKgGain:
    def test_frozen_values(self):
        assert kg_gain(0.0, 1.0) == pytest.approx(PHI0, rel=1e-14)
        assert kg_gain(1.0, 1.0) == pytest.approx(GAIN_1_1, rel=1e-13)
        assert kg_gain(2.0, 1.0) == pytest.approx(GAIN_2_1, rel=1e-13)
        assert kg_gain(1.0, 2.0) == pytest.approx(GAIN_1_2, rel=1e-13)
        assert kg_gain(0.5, 2.0) == pytest.approx(GAIN_HALF_2, rel=1e-13)

    def test_deep_tail_no_nan(self):
        assert kg_gain(3.0, 0.25) == pytest.approx(GAIN_3_QUARTER, rel=1e-10)
        assert kg_gain(30.0, 1.0) == pytest.approx(GAIN_30_1, rel=1e-10)
        extreme = kg_gain(100.0, 1.0)
        assert extreme == 0.0  # underflows cleanly, never NaN
        assert kg_gain(1e6, 1e-3) == 0.0

    def test_zero_scale_is_zero(self):
        assert kg_gain(1.0, 0.0) == 0.0
        assert kg_gain(0.0, 0.0) == 0.0

    def test_scales_linearly_in_scale(self):
        # g(c*s, c*t) = c * g(s, t) for c > 0.
        for c in (0.5, 3.0, 40.0):
            assert kg_gain(1.0 * c, 1.0 * c) == pytest.approx(c * GAIN_1_1,
                                                              rel=1e-12)

    def test_matches_naive_formula(self):
        rng = np.random.default_rng(31)
        for _ in range(300):
            t = float(rng.uniform(0.05, 4.0))
            u = float(rng.uniform(0.0, 10.0))
            s = u * t
            naive = t * norm.pdf(u) - s * norm.cdf(-u)
            assert kg_gain(s, t) == pytest.approx(naive, rel=1e-10)

    def test_monotone_in_gap_and_scale(self):
        gaps = np.linspace(0.0, 5.0, 26)
        scales = np.linspace(0.05, 5.0, 26)
        table = kg_gain(gaps[:, None], scales[None, :])
        assert table.shape == (26, 26)
        assert np.all(np.diff(table, axis=0) <= 0)   # decreasing in gap
        assert np.all(np.diff(table, axis=1) > 0)    # increasing in scale
        assert np.all(table >= 0)

    def test_gain_bounded_by_scale_times_phi0(self):
        rng = np.random.default_rng(32)
        gaps = rng.uniform(0, 10, size=500)
        scales = rng.uniform(0, 3, size=500)
        assert np.all(kg_gain(gaps, scales) <= scales * PHI0 * (1 + 1e-12))

    def test_broadcasting_and_scalars(self):
        out = kg_gain(np.array([0.0, 1.0]), 1.0)
        assert out.shape == (2,)
        assert out[0] == pytest.approx(PHI0, rel=1e-14)
        assert isinstance(kg_gain(1.0, 1.0), float)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError, match="nonnegative"):
            kg_gain(-1.0, 1.0)
        with pytest.raises(ValueError, match="nonnegative"):
            kg_gain(1.0, -1.0)
        with pytest.raises(ValueError, match="finite"):
            kg_gain(float("nan"), 1.0)
        with pytest.raises(ValueError, match="finite"):
            kg_gain(1.0, float("inf"))


class TestMillsRatio:
    def test_exact_branch(self):
        u = np.array([0.0, 0.5, 3.0, 19.5])
        want = norm.cdf(-u) / norm.pdf(u)
        assert np.allclose(_mills_ratio(u), want, rtol=1e-12)

    def test_tail_branch_value_and_accuracy(self):
        got = float(_mills_ratio(np.array([20.0]))[0])
        assert got == 20.0 / 401.0  # rational tail form, used verbatim
        assert abs(got - MILLS_20_EXACT) / MILLS_20_EXACT < 1e-4

    def test_continuous_across_crossover(self):
        below = float(_mills_ratio(np.array([20.0 - 1e-9]))[0])
        above = float(_mills_ratio(np.array([20.0]))[0])
        assert abs(below - above) / above < 2e-5


class TestBeliefState:
    def test_fresh_state(self):
        state = BeliefState.fresh(se_kernel(), 3)
        assert state.num_alternatives == 3
        assert state.dim == 1
        assert state.sample_counts.tolist() == [0, 0, 0]
        assert state.total_cost_spent == 0.0

    def test_needs_two_alternatives(self):
        with pytest.raises(ValueError, match="two"):
            BeliefState.fresh(se_kernel(), 1)

    def test_update_with_tracks_counts_and_cost(self):
        from ikg import Observation

        state = BeliefState.fresh(se_kernel(), 2)
        state = state.update_with(1, Observation(np.array([2.0]), 0.3, 0.01), 1.5)
        assert state.sample_counts.tolist() == [0, 1]
        assert state.total_cost_spent == 1.5
        assert state.posteriors[1].n == 1
        assert state.posteriors[0].n == 0

    def test_update_with_rejects_bad_cost(self):
        from ikg import Observation

        state = BeliefState.fresh(se_kernel(), 2)
        with pytest.raises(ValueError, match="cost"):
            state.update_with(0, Observation(np.array([0.0]), 0.0, 1.0), 0.0)

    def test_counts_must_sum_to_observations(self):
        with pytest.raises(ValueError, match="sum"):
            BeliefState([GpPosterior(se_kernel()), GpPosterior(se_kernel())],
                        sample_counts=[1, 0])

    def test_immutable(self):
        state = BeliefState.fresh(se_kernel(), 2)
        with pytest.raises(AttributeError):
            state.total_cost_spent = 5.0
        with pytest.raises(ValueError):
            state.sample_counts[0] = 3

    def test_means_at_shape(self):
        rng = np.random.default_rng(33)
        state = random_state(se_kernel(2), 3, [2, 2, 2], rng)
        means = state.means_at(rng.uniform(0, 10, size=(7, 2)))
        assert means.shape == (3, 7)

    def test_record_roundtrip(self):
        rng = np.random.default_rng(34)
        state = random_state(se_kernel(), 3, [2, 1, 3], rng)
        clone = BeliefState.from_record(state.to_record())
        assert clone.sample_counts.tolist() == state.sample_counts.tolist()
        assert clone.total_cost_spent == state.total_cost_spent
        X = rng.uniform(0, 10, size=(5, 1))
        assert np.allclose(clone.means_at(X), state.means_at(X), atol=1e-12)


class TestPointwise:
    def test_gap_sign_and_value(self):
        rng = np.random.default_rng(35)
        state = random_state(se_kernel(), 3, [3, 3, 3], rng, y_scale=2.0)
        v = np.array([4.2])
        means = state.means_at(v[None, :])[:, 0]
        for i in range(3):
            want = means[i] - np.delete(means, i).max()
            assert posterior_mean_gap(state, i, v) == pytest.approx(want,
                                                                    abs=1e-14)

    def test_pointwise_matches_components(self):
        rng = np.random.default_rng(36)
        state = random_state(se_kernel(), 2, [4, 4], rng)
        v = np.array([3.0])
        x = np.array([5.0])
        gap = abs(posterior_mean_gap(state, 0, v))
        scale = abs(state.posteriors[0].innovation_scale(v, x, 0.01))
        assert pointwise_kg(state, 0, v, x, 0.01) == pytest.approx(
            kg_gain(gap, scale), rel=1e-13)


class TestLogIkgEstimate:
    def test_fresh_prior_closed_form(self):
        # Flat prior means make every gap zero, so each term is
        # scale * pdf(0); with xi == x the scale is tau/sqrt(tau^2+lam).
        state = BeliefState.fresh(se_kernel(), 2)
        x = np.array([5.0])
        sample = log_ikg_estimate(state, 0, x, x[None, :], const(1.0),
                                  const(1.0))
        assert sample.log_value == pytest.approx(math.log(HALF_INV_SQRT_PI),
                                                 rel=1e-12)
        assert sample.gradient is None

    def test_matches_pointwise_average(self):
        rng = np.random.default_rng(37)
        state = random_state(se_kernel(), 3, [4, 4, 4], rng)
        x = np.array([2.5])
        Xi = rng.uniform(0, 10, size=(40, 1))
        sample = log_ikg_estimate(state, 1, x, Xi, const(0.01), const(2.0))
        gains = [pointwise_kg(state, 1, xi, x, 0.01) for xi in Xi]
        assert math.exp(sample.log_value) == pytest.approx(
            np.mean(gains) / 2.0, rel=1e-10)

    def test_precomputed_means_identical(self):
        rng = np.random.default_rng(38)
        state = random_state(se_kernel(), 3, [3, 3, 3], rng)
        x = np.array([7.0])
        Xi = rng.uniform(0, 10, size=(25, 1))
        a = log_ikg_estimate(state, 0, x, Xi, const(0.01), const(1.0))
        b = log_ikg_estimate(state, 0, x, Xi, const(0.01), const(1.0),
                             means=state.means_at(Xi))
        assert a.log_value == b.log_value

    def test_cost_shifts_log_value(self):
        rng = np.random.default_rng(39)
        state = random_state(se_kernel(), 2, [3, 3], rng)
        x = np.array([1.0])
        Xi = rng.uniform(0, 10, size=(15, 1))
        base = log_ikg_estimate(state, 0, x, Xi, const(0.01), const(1.0))
        scaled = log_ikg_estimate(state, 0, x, Xi, const(0.01), const(4.0))
        assert scaled.log_value == pytest.approx(base.log_value - math.log(4.0),
                                                 abs=1e-12)

    def test_all_zero_scales_give_neg_inf(self):
        # A huge length scale pushes the covariance to exact zero at any
        # separated pair, so every innovation scale underflows to zero.
        state = BeliefState.fresh(Kernel("se", 1.0, [1e8]), 2)
        x = np.array([0.0])
        Xi = np.array([[5.0], [9.0]])
        sample = log_ikg_estimate(state, 0, x, Xi, const(0.01), const(1.0))
        assert sample.log_value == float("-inf")
        assert sample.gradient is None

    def test_deterministic_upper_bound(self):
        rng = np.random.default_rng(40)
        state = random_state(se_kernel(), 3, [5, 5, 5], rng, y_scale=3.0)
        x = np.array([6.0])
        Xi = rng.uniform(0, 10, size=(50, 1))
        sample = log_ikg_estimate(state, 2, x, Xi, const(0.01), const(1.0))
        scales = np.abs(state.posteriors[2].innovation_scale_vec(Xi, x, 0.01))
        bound = PHI0 * scales.mean()
        assert math.exp(sample.log_value) <= bound * (1 + 1e-12)

    def test_rejects_bad_inputs(self):
        state = BeliefState.fresh(se_kernel(), 2)
        x = np.array([0.0])
        Xi = np.array([[1.0]])
        with pytest.raises(ValueError, match="cost"):
            log_ikg_estimate(state, 0, x, Xi, const(0.01), const(0.0))
        with pytest.raises(ValueError, match="at least one"):
            log_ikg_estimate(state, 0, x, np.empty((0, 1)), const(0.01),
                             const(1.0))
        with pytest.raises(ValueError):
            log_ikg_estimate(state, 5, x, Xi, const(0.01), const(1.0))


class TestQuadratureReference:
    def make_density(self):
        return CovariateDensity("uniform")

    def test_nonnegative_and_symmetric(self):
        domain = BoxDomain([0.0], [10.0])
        state = BeliefState.fresh(se_kernel(), 2)
        density = self.make_density()
        left = ikg_quadrature_reference(state, 0, np.array([3.0]), density,
                                        domain, const(0.01), const(1.0))
        right = ikg_quadrature_reference(state, 0, np.array([7.0]), density,
                                         domain, const(0.01), const(1.0))
        assert left >= 0.0
        # A flat prior is symmetric about the box center.
        assert left == pytest.approx(right, rel=1e-10)

    def test_guards(self):
        domain = BoxDomain([0.0], [10.0])
        state = BeliefState.fresh(se_kernel(), 2)
        density = self.make_density()
        with pytest.raises(ValueError, match="at least 101"):
            ikg_quadrature_reference(state, 0, np.array([3.0]), density,
                                     domain, const(0.01), const(1.0),
                                     grid_size=100)
        state2 = BeliefState.fresh(se_kernel(2), 2)
        with pytest.raises(ValueError, match="d = 1"):
            ikg_quadrature_reference(state2, 0, np.array([3.0, 3.0]), density,
                                     BoxDomain([0.0, 0.0], [10.0, 10.0]),
                                     const(0.01), const(1.0))

    def test_monte_carlo_agrees_within_three_standard_errors(self):
        rng = np.random.default_rng(41)
        state = random_state(se_kernel(), 3, [5, 5, 5], rng)
        domain = BoxDomain([0.0], [10.0])
        density = self.make_density()
        x = np.array([4.0])
        quad = ikg_quadrature_reference(state, 0, x, density, domain,
                                        const(0.01), const(1.0),
                                        grid_size=4001)
        draws = density.sample(domain, 20000, rng)
        gaps = np.abs(state.means_at(draws)[0]
                      - np.delete(state.means_at(draws), 0, axis=0).max(axis=0))
        scales = np.abs(
            state.posteriors[0].innovation_scale_vec(draws, x, 0.01))
        gains = kg_gain(gaps, scales)
        mc = float(gains.mean())
        se = float(gains.std(ddof=1) / math.sqrt(len(gains)))
        assert abs(mc - quad) <= 3.0 * se + 1e-8
        sample = log_ikg_estimate(state, 0, x, draws, const(0.01),
                                  const(1.0))
        assert math.exp(sample.log_value) == pytest.approx(mc, rel=1e-10)


class TestGradient:
    def saa_value(self, state, i, Xi, noise_fn, cost_fn):
        def value(x):
            sample = log_ikg_estimate(state, i, x, Xi, noise_fn, cost_fn)
            return math.exp(sample.log_value)

        return value

    @staticmethod
    def stencil_smooth(posterior, Xi, x, noise, h=1e-5):
        """True when no innovation scale changes sign across the central
        difference stencil (|scale| has a kink at zero crossings)."""
        base = np.sign(posterior.innovation_scale_vec(Xi, x, noise))
        for j in range(x.size):
            for sgn in (-h, h):
                shifted = x.copy()
                shifted[j] += sgn
                there = np.sign(
                    posterior.innovation_scale_vec(Xi, shifted, noise))
                if np.any(base * there < 0):
                    return False
        return True

    def test_sample_matches_batch_row(self):
        rng = np.random.default_rng(42)
        state = random_state(se_kernel(2), 3, [4, 4, 4], rng)
        x = rng.uniform(0, 10, size=2)
        Xi = rng.uniform(0, 10, size=(6, 2))
        batch = ikg_gradient_batch(state, 0, Xi, x, const(0.01), None,
                                   const(1.0), None)
        assert batch.shape == (6, 2)
        for j in range(6):
            single = ikg_gradient_sample(state, 0, Xi[j], x, const(0.01),
                                         None, const(1.0), None)
            assert np.array_equal(single, batch[j])

    @pytest.mark.parametrize("family", ["se", "matern32", "matern52"])
    def test_matches_finite_differences_constant_cost(self, family):
        kernel = Kernel(family, 1.0, [0.8])
        rng = np.random.default_rng(43)
        state = random_state(kernel, 3, [5, 5, 5], rng, y_scale=1.5)
        Xi = rng.uniform(0, 10, size=(30, 1))
        value = self.saa_value(state, 1, Xi, const(0.01), const(1.0))
        checked = 0
        for x0 in np.linspace(0.7, 9.3, 12):
            x = np.array([x0])
            if not self.stencil_smooth(state.posteriors[1], Xi, x, 0.01):
                continue
            grad = ikg_gradient_batch(state, 1, Xi, x, const(0.01), None,
                                      const(1.0), None).mean(axis=0)
            fd = central_diff(value, x)
            assert rel_err(grad, fd, floor=1e-8) < 1e-4
            checked += 1
        assert checked >= 8

    def test_matches_finite_differences_varying_cost(self):
        kernel = se_kernel(2, alpha=0.5)
        rng = np.random.default_rng(44)
        state = random_state(kernel, 3, [4, 4, 4], rng)
        Xi = rng.uniform(0, 10, size=(20, 2))
        center = np.full(2, 5.0)

        def cost_fn(x):
            gap = np.asarray(x, dtype=float) - center
            return 1.0 + float(gap @ gap) / 20.0

        def cost_grad_fn(x):
            return (np.asarray(x, dtype=float) - center) / 10.0

        value = self.saa_value(state, 0, Xi, const(0.01), cost_fn)
        checked = 0
        for _ in range(12):
            x = rng.uniform(1, 9, size=2)
            if not self.stencil_smooth(state.posteriors[0], Xi, x, 0.01):
                continue
            grad = ikg_gradient_batch(state, 0, Xi, x, const(0.01), None,
                                      cost_fn, cost_grad_fn).mean(axis=0)
            fd = central_diff(value, x)
            assert rel_err(grad, fd, floor=1e-8) < 1e-4
            checked += 1
        assert checked >= 8

    def test_zero_scale_rows_are_zero(self):
        state = BeliefState.fresh(Kernel("se", 1.0, [1e8]), 2)
        x = np.array([0.0])
        Xi = np.array([[0.0], [6.0]])
        rows = ikg_gradient_batch(state, 0, Xi, x, const(0.01), None,
                                  const(1.0), None)
        # xi == x row has zero gradient at the flat prior maximum; the far
        # row is inactive (zero scale).
        assert np.array_equal(rows[1], np.zeros(1))

    def test_rejects_nonpositive_cost(self):
        state = BeliefState.fresh(se_kernel(), 2)
        with pytest.raises(ValueError, match="cost"):
            ikg_gradient_batch(state, 0, np.array([[1.0]]), np.array([0.0]),
                               const(0.01), None, const(-1.0), None)
