"""Integrated knowledge-gradient acquisition over a covariate density.

The sampling problem tracks M independent response surfaces. Taking one
more sample of alternative ``i`` at location ``x`` improves the learned
decision at a covariate ``v`` by the expected one-step gain

    gain = kg_gain(|gap|, |scale|),
    kg_gain(s, t) = t * pdf(s/t) - s * cdf(-s/t),

where ``gap`` is alternative i's posterior-mean lead over the best other
alternative at ``v`` and ``scale`` is the innovation scale of the i-th
posterior between ``v`` and ``x`` (``pdf``/``cdf`` standard normal).
``kg_gain`` is positive for ``t > 0``, strictly decreasing in the gap,
increasing in the scale, and tends to 0 as the gap grows or the scale
vanishes; ``kg_gain(s, 0)`` is defined as that limit, 0.

The acquisition value of the pair ``(i, x)`` is the density-weighted
integral of the pointwise gain divided by the sampling cost. The integral
has no closed form, so it is estimated by a sample average over covariate
draws. Because individual gains underflow double precision once
``gap/scale`` is a few dozen, the estimator works in the log domain:

    per draw:  log t - u^2/2 - log sqrt(2*pi) + log1p(-u * mills(u)),
    combined:  max-shifted log-sum-exp - log(J) - log cost,

with ``u = gap/scale`` and the Mills ratio ``mills(u) = cdf(-u)/pdf(u)``
evaluated through the scaled complementary error function for ``u < 20``
and by the rational tail bound ``u / (u^2 + 1)`` above (the two branches
agree to about 1e-5 relative at the crossover).

For stochastic ascent over ``x`` the module also provides the per-draw
gradient of ``gain / cost``: the gain depends on ``x`` only through the
innovation scale, giving

    d gain / dx = sign(scale) * pdf(u) * d scale / dx      (0 where scale = 0)

and the quotient rule adds the cost-gradient term. A d = 1 trapezoid
quadrature of the same integrand serves as the testing oracle for both
the value and the gradient estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, logsumexp

from .gp import GpPosterior, Observation
from .kernels import Kernel, _as_points, _as_vector

__all__ = [
    "BeliefState",
    "AcquisitionSample",
    "kg_gain",
    "posterior_mean_gap",
    "pointwise_kg",
    "log_ikg_estimate",
    "ikg_gradient_sample",
    "ikg_gradient_batch",
    "ikg_quadrature_reference",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
_SQRT_2 = math.sqrt(2.0)
# Mills-ratio branch point; below it the erfcx form is exact, above it the
# rational tail bound is used. Fixed by the estimator's contract.
_MILLS_CROSSOVER = 20.0


class BeliefState:
    """Posterior beliefs over all M alternatives plus sampling history.

    Parameters
    ----------
    posteriors : sequence of GpPosterior
        One per alternative; at least two.
    sample_counts : array_like of int, optional
        How many samples each alternative has received. Defaults to the
        posterior data sizes; must sum to the total observation count.
    total_cost_spent : float, optional
        Cumulative sampling cost paid so far.
    """

    __slots__ = ("posteriors", "sample_counts", "total_cost_spent")

    def __init__(self, posteriors, sample_counts=None, total_cost_spent: float = 0.0):
        posteriors = tuple(posteriors)
        if len(posteriors) < 2:
            raise ValueError("a belief state needs at least two alternatives")
        if not all(isinstance(p, GpPosterior) for p in posteriors):
            raise ValueError("posteriors must be GpPosterior instances")
        dims = {p.dim for p in posteriors}
        if len(dims) != 1:
            raise ValueError("all posteriors must share one covariate dimension")
        if sample_counts is None:
            sample_counts = [p.n for p in posteriors]
        counts = np.asarray(sample_counts, dtype=int).copy()
        if counts.shape != (len(posteriors),) or np.any(counts < 0):
            raise ValueError("sample_counts must be M nonnegative integers")
        if counts.sum() != sum(p.n for p in posteriors):
            raise ValueError("sample_counts must sum to the total observation count")
        total_cost_spent = float(total_cost_spent)
        if total_cost_spent < 0 or not np.isfinite(total_cost_spent):
            raise ValueError("total_cost_spent must be finite and nonnegative")
        counts.flags.writeable = False
        object.__setattr__(self, "posteriors", posteriors)
        object.__setattr__(self, "sample_counts", counts)
        object.__setattr__(self, "total_cost_spent", total_cost_spent)

    def __setattr__(self, name, value):
        raise AttributeError("BeliefState is immutable")

    @classmethod
    def fresh(cls, kernel: Kernel, num_alternatives: int, prior_mean=None,
              jitter: float = 0.0) -> "BeliefState":
        """Data-free belief with one shared prior for every alternative."""
        if num_alternatives < 2:
            raise ValueError("need at least two alternatives")
        return cls(
            [GpPosterior(kernel, prior_mean, jitter=jitter) for _ in range(num_alternatives)]
        )

    @property
    def num_alternatives(self) -> int:
        return len(self.posteriors)

    @property
    def dim(self) -> int:
        return self.posteriors[0].dim

    def __repr__(self) -> str:
        return (
            f"BeliefState(M={self.num_alternatives}, "
            f"counts={self.sample_counts.tolist()}, "
            f"spent={self.total_cost_spent!r})"
        )

    def means_at(self, X) -> np.ndarray:
        """Posterior means of every alternative at rows of X; shape (M, q)."""
        X = _as_points(X, self.dim, "X")
        return np.stack([p.mean_at(X) for p in self.posteriors])

    def update_with(self, alternative: int, obs: Observation, cost: float) -> "BeliefState":
        """New state with one observation folded into one posterior."""
        self._check_index(alternative)
        cost = float(cost)
        if not (np.isfinite(cost) and cost > 0):
            raise ValueError("cost must be finite and positive")
        posteriors = list(self.posteriors)
        posteriors[alternative] = posteriors[alternative].update(obs)
        counts = self.sample_counts.copy()
        counts[alternative] += 1
        return BeliefState(posteriors, counts, self.total_cost_spent + cost)

    def _check_index(self, i: int) -> int:
        if not 0 <= i < self.num_alternatives:
            raise ValueError(
                f"alternative index {i} out of range [0, {self.num_alternatives})"
            )
        return i

    def to_record(self) -> dict:
        return {
            "posteriors": [p.to_record() for p in self.posteriors],
            "sample_counts": self.sample_counts.tolist(),
            "total_cost_spent": self.total_cost_spent,
        }

    @classmethod
    def from_record(cls, record: dict) -> "BeliefState":
        return cls(
            [GpPosterior.from_record(r) for r in record["posteriors"]],
            record.get("sample_counts"),
            record.get("total_cost_spent", 0.0),
        )


@dataclass(frozen=True)
class AcquisitionSample:
    """One acquisition evaluation: the log estimate, optionally a gradient.

    ``log_value`` is ``-inf`` exactly when every integrand term vanished
    (all innovation scales were zero for the drawn covariates).
    """

    log_value: float
    gradient: np.ndarray | None = None


def _mills_ratio(u: np.ndarray) -> np.ndarray:
    """cdf(-u)/pdf(u) for u >= 0: erfcx form below the crossover, rational
    tail bound above."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    exact = u < _MILLS_CROSSOVER
    out[exact] = _SQRT_HALF_PI * erfcx(u[exact] / _SQRT_2)
    tail = ~exact
    out[tail] = u[tail] / (u[tail] * u[tail] + 1.0)
    return out


def _log_gain_terms(gaps: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """log kg_gain elementwise for positive scales and nonnegative gaps."""
    u = gaps / scales
    arg = -u * _mills_ratio(u)
    # u * mills(u) < 1 analytically; a one-ulp overshoot would poison log1p.
    np.clip(arg, -(1.0 - 1e-16), None, out=arg)
    return np.log(scales) - 0.5 * u * u - _LOG_SQRT_2PI + np.log1p(arg)


def kg_gain(gap, scale):
    """Expected one-step gain ``t*pdf(s/t) - s*cdf(-s/t)`` at gap s, scale t.

    Accepts scalars or broadcasting arrays. ``scale == 0`` returns 0 (the
    continuous limit); negative gaps are rejected since callers pass
    absolute values. Evaluated in the log domain, so extreme gap/scale
    ratios underflow gracefully to 0 instead of producing NaN.
    """
    gap_arr = np.asarray(gap, dtype=float)
    scale_arr = np.asarray(scale, dtype=float)
    if np.any(~np.isfinite(gap_arr)) or np.any(~np.isfinite(scale_arr)):
        raise ValueError("gap and scale must be finite")
    if np.any(gap_arr < 0):
        raise ValueError("gap must be nonnegative (pass absolute gaps)")
    if np.any(scale_arr < 0):
        raise ValueError("scale must be nonnegative (pass absolute scales)")
    gap_b, scale_b = np.broadcast_arrays(gap_arr, scale_arr)
    out = np.zeros(gap_b.shape)
    pos = scale_b > 0
    if np.any(pos):
        out[pos] = np.exp(_log_gain_terms(gap_b[pos], scale_b[pos]))
    if np.isscalar(gap) and np.isscalar(scale):
        return float(out)
    return out


def posterior_mean_gap(state: BeliefState, i: int, v) -> float:
    """Alternative i's posterior-mean lead over the best other alternative
    at covariate v. Negative when some other alternative looks better."""
    state._check_index(i)
    means = state.means_at(np.asarray(v, dtype=float)[None, :])[:, 0]
    others = np.delete(means, i)
    return float(means[i] - others.max())


def pointwise_kg(state: BeliefState, i: int, v, x, noise_at_x: float) -> float:
    """One-step gain at covariate ``v`` from sampling alternative ``i`` at
    ``x``; zero when the innovation scale vanishes."""
    state._check_index(i)
    gap = posterior_mean_gap(state, i, v)
    scale = state.posteriors[i].innovation_scale(v, x, noise_at_x)
    return kg_gain(abs(gap), abs(scale))


def _gaps_for(state: BeliefState, i: int, means: np.ndarray) -> np.ndarray:
    others = np.delete(means, i, axis=0)
    return means[i] - others.max(axis=0)


def log_ikg_estimate(
    state: BeliefState,
    i: int,
    x,
    xi_points,
    noise_fn,
    cost_fn,
    means: np.ndarray | None = None,
) -> AcquisitionSample:
    """Log of the sample-average acquisition estimate for sampling (i, x).

    Parameters
    ----------
    state : BeliefState
    i : int
        Alternative index.
    x : array_like of shape (d,)
        Candidate sampling location.
    xi_points : array_like of shape (J, d)
        Covariate draws from the density; the caller owns the sampling.
    noise_fn, cost_fn : callable
        Map a location to the sampling variance / cost for alternative i;
        both must be positive at ``x``.
    means : ndarray of shape (M, J), optional
        Posterior means of all alternatives at ``xi_points``, if the
        caller has them already (the same draw batch is typically reused
        across alternatives within one decision).

    Returns
    -------
    AcquisitionSample
        ``log_value = -inf`` iff every draw had zero innovation scale.
    """
    state._check_index(i)
    x = _as_vector(x, state.dim, "x")
    Xi = _as_points(xi_points, state.dim, "xi_points")
    if Xi.shape[0] < 1:
        raise ValueError("need at least one covariate draw")
    cost = float(cost_fn(x))
    if not (np.isfinite(cost) and cost > 0):
        raise ValueError(f"cost_fn(x) must be finite and positive, got {cost!r}")
    noise_at_x = float(noise_fn(x))
    if means is None:
        means = state.means_at(Xi)
    gaps = np.abs(_gaps_for(state, i, means))
    scales = np.abs(state.posteriors[i].innovation_scale_vec(Xi, x, noise_at_x))
    active = scales > 0.0
    if not np.any(active):
        return AcquisitionSample(float("-inf"), None)
    terms = _log_gain_terms(gaps[active], scales[active])
    log_value = float(logsumexp(terms) - math.log(Xi.shape[0]) - math.log(cost))
    return AcquisitionSample(log_value, None)


def ikg_gradient_batch(
    state: BeliefState,
    i: int,
    xi_points,
    x,
    noise_fn,
    noise_grad_fn,
    cost_fn,
    cost_grad_fn,
    means: np.ndarray | None = None,
) -> np.ndarray:
    """Per-draw gradients in ``x`` of ``gain(xi, x) / cost(x)``.

    Returns an array of shape (J, d); averaging rows gives the mini-batch
    ascent direction. Rows with zero innovation scale are exactly zero.
    ``noise_grad_fn`` / ``cost_grad_fn`` may be ``None`` for constant
    noise / cost.
    """
    state._check_index(i)
    x = _as_vector(x, state.dim, "x")
    Xi = _as_points(xi_points, state.dim, "xi_points")
    cost = float(cost_fn(x))
    if not (np.isfinite(cost) and cost > 0):
        raise ValueError(f"cost_fn(x) must be finite and positive, got {cost!r}")
    cost_grad = (
        np.zeros(state.dim)
        if cost_grad_fn is None
        else _as_vector(np.asarray(cost_grad_fn(x), dtype=float), state.dim, "cost gradient")
    )
    noise_at_x = float(noise_fn(x))
    noise_grad = None if noise_grad_fn is None else np.asarray(noise_grad_fn(x), dtype=float)
    if means is None:
        means = state.means_at(Xi)
    gaps = np.abs(_gaps_for(state, i, means))
    scales, scale_grads = state.posteriors[i].innovation_terms(
        Xi, x, noise_at_x, noise_grad
    )
    out = np.zeros((Xi.shape[0], state.dim))
    active = scales != 0.0
    if np.any(active):
        a_scales = np.abs(scales[active])
        u = gaps[active] / a_scales
        density = np.exp(-0.5 * u * u - _LOG_SQRT_2PI)
        gain_grad = (
            np.sign(scales[active]) * density
        )[:, None] * scale_grads[active]
        gains = np.exp(_log_gain_terms(gaps[active], a_scales))
        out[active] = gain_grad / cost - (gains / (cost * cost))[:, None] * cost_grad[None, :]
    return out


def ikg_gradient_sample(
    state: BeliefState,
    i: int,
    xi,
    x,
    noise_fn,
    noise_grad_fn,
    cost_fn,
    cost_grad_fn,
) -> np.ndarray:
    """Single-draw form of :func:`ikg_gradient_batch`; shape (d,)."""
    xi = _as_vector(xi, state.dim, "xi")
    return ikg_gradient_batch(
        state, i, xi[None, :], x, noise_fn, noise_grad_fn, cost_fn, cost_grad_fn
    )[0]


def ikg_quadrature_reference(
    state: BeliefState,
    i: int,
    x,
    density,
    domain,
    noise_fn,
    cost_fn,
    grid_size: int = 1001,
) -> float:
    """Trapezoid quadrature of the acquisition integral; d = 1 only.

    Serves as the deterministic oracle that the Monte-Carlo estimator and
    its gradient are validated against. ``density`` must expose
    ``pdf(X, domain)`` normalized over the box.
    """
    if state.dim != 1:
        raise ValueError("quadrature reference supports d = 1 only")
    if grid_size < 101:
        raise ValueError("grid_size must be at least 101")
    x = _as_vector(x, 1, "x")
    cost = float(cost_fn(x))
    if not (np.isfinite(cost) and cost > 0):
        raise ValueError(f"cost_fn(x) must be finite and positive, got {cost!r}")
    noise_at_x = float(noise_fn(x))
    grid = np.linspace(float(domain.lower[0]), float(domain.upper[0]), grid_size)[:, None]
    means = state.means_at(grid)
    gaps = np.abs(_gaps_for(state, i, means))
    scales = np.abs(state.posteriors[i].innovation_scale_vec(grid, x, noise_at_x))
    gains = kg_gain(gaps, scales)
    weights = density.pdf(grid, domain)
    integral = float(np.trapezoid(gains * weights, grid[:, 0]))
    return integral / cost
