"""Exact Gaussian-process posterior for one alternative's response surface.

A :class:`GpPosterior` holds ``n`` noisy observations of one unknown
function ``theta`` and exposes its Gaussian posterior under a stationary
prior. With data locations ``V`` (rows), values ``y``, per-location noise
variances ``lam`` and prior mean ``m0``, the posterior mean and covariance
are the standard batch formulas

    mean(x)      = m0(x) + k0(x, V) G^{-1} (y - m0(V)),
    cov(x, x')   = k0(x, x') - k0(x, V) G^{-1} k0(V, x'),

where ``G = k0(V, V) + diag(lam)``. ``G`` is factorized once per posterior
(lower-triangular Cholesky, recomputed in full on every update; at the
data sizes this package targets an O(n^3) refresh is cheap and avoids
incremental-update drift).

Appending one observation at ``v`` is equivalent to the rank-one
innovation form

    mean'(x)    = mean(x) + scale(x, v) * z,
    cov'(x, x') = cov(x, x') - scale(x, v) * scale(x', v),

with ``z = (y - mean(v)) / sqrt(cov(v, v) + lam(v))`` and the innovation
scale

    scale(x, v) = cov(x, v) / sqrt(cov(v, v) + lam(v)),

which is the quantity the acquisition layer integrates. Equivalence of the
two forms is enforced by tests against the batch construction rather than
assumed.

The module also provides the input-space gradients of the posterior
covariance needed for gradient-based acquisition optimization. Writing
``g_l = grad_x k0(v_l, x)`` for the prior-kernel gradients at the data
locations and ``A = [g_1 ... g_n] G^{-1}`` (a d-by-n matrix),

    grad_x cov(v, x)  = grad_x k0(v, x) - A k0(V, v),
    d/dx  cov(x, x)   = -2 A k0(V, x),

both of which reduce to the prior expressions when ``n = 0``.

Posteriors are immutable once built; ``update`` returns a new value.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import NumericalError
from .kernels import Kernel, _as_points, _as_vector

__all__ = ["ConstantMean", "Observation", "GpPosterior"]

LOGGER = logging.getLogger(__name__)

# Raw posterior variances this far below zero indicate conditioning
# trouble rather than benign cancellation and are not silently clamped.
_VAR_CLAMP_FLOOR = -1e-8


class ConstantMean:
    """Prior mean function that is constant over the domain."""

    __slots__ = ("value",)

    def __init__(self, value: float = 0.0) -> None:
        value = float(value)
        if not np.isfinite(value):
            raise ValueError("prior mean value must be finite")
        object.__setattr__(self, "value", value)

    def __setattr__(self, name, value):
        raise AttributeError("ConstantMean is immutable")

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        q = X.shape[0] if X.ndim == 2 else 1
        return np.full(q, self.value)

    def __repr__(self) -> str:
        return f"ConstantMean({self.value!r})"

    def to_spec(self) -> dict:
        return {"kind": "constant", "value": self.value}

    @classmethod
    def from_spec(cls, spec: dict) -> "ConstantMean":
        if spec.get("kind") == "zero":
            return cls(0.0)
        if spec.get("kind") == "constant":
            return cls(spec.get("value", 0.0))
        raise ValueError(f"unsupported prior-mean spec {spec!r}")


class Observation:
    """One noisy function evaluation.

    Parameters
    ----------
    location : array_like of shape (d,)
        Where the sample was taken.
    value : float
        The observed response.
    noise : float
        The sampling variance at the location; must be positive.
    """

    __slots__ = ("location", "value", "noise")

    def __init__(self, location, value: float, noise: float) -> None:
        location = np.asarray(location, dtype=float)
        if location.ndim != 1 or not np.all(np.isfinite(location)):
            raise ValueError("location must be a finite 1-d vector")
        value = float(value)
        if not np.isfinite(value):
            raise ValueError("observation value must be finite")
        noise = float(noise)
        if not (np.isfinite(noise) and noise > 0):
            raise ValueError("observation noise must be finite and positive")
        location = location.copy()
        location.flags.writeable = False
        object.__setattr__(self, "location", location)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "noise", noise)

    def __setattr__(self, name, value):
        raise AttributeError("Observation is immutable")

    def __repr__(self) -> str:
        return (
            f"Observation(location={self.location.tolist()!r}, "
            f"value={self.value!r}, noise={self.noise!r})"
        )


class GpPosterior:
    """Gaussian posterior over one response surface.

    Parameters
    ----------
    kernel : Kernel
        Stationary prior covariance.
    prior_mean : callable or None
        Maps an (n, d) array of points to an (n,) array of prior means.
        ``None`` means the zero function. Only :class:`ConstantMean`
        instances survive serialization.
    locations, observations, noise_values : array_like, optional
        Existing data; all three must have matching first dimension.
        Noise variances must be strictly positive.
    jitter : float, optional
        Constant added to the Gram diagonal before factorization.
        Default 0: a failed factorization raises
        :class:`~ikg.exceptions.NumericalError` instead of being papered
        over, since the model assumptions guarantee positive definiteness.

    Notes
    -----
    Instances are immutable; :meth:`update` returns a new posterior with
    the observation appended and the factorization rebuilt. Concurrent
    reads are safe.
    """

    __slots__ = (
        "kernel",
        "prior_mean",
        "locations",
        "observations",
        "noise_values",
        "jitter",
        "_cho",
        "_weights",
    )

    def __init__(
        self,
        kernel: Kernel,
        prior_mean=None,
        locations=None,
        observations=None,
        noise_values=None,
        jitter: float = 0.0,
    ) -> None:
        if not isinstance(kernel, Kernel):
            raise ValueError("kernel must be a Kernel instance")
        if prior_mean is None:
            prior_mean = ConstantMean(0.0)
        d = kernel.dim
        if locations is None:
            locations = np.empty((0, d))
        locations = np.asarray(locations, dtype=float).reshape(-1, d).copy()
        n = locations.shape[0]
        observations = (
            np.empty(0) if observations is None else np.asarray(observations, dtype=float)
        ).reshape(-1).copy()
        noise_values = (
            np.empty(0) if noise_values is None else np.asarray(noise_values, dtype=float)
        ).reshape(-1).copy()
        if observations.shape[0] != n or noise_values.shape[0] != n:
            raise ValueError(
                "locations, observations and noise_values must have equal length"
            )
        if n:
            if not np.all(np.isfinite(locations)):
                raise ValueError("locations contain non-finite coordinates")
            if not np.all(np.isfinite(observations)):
                raise ValueError("observations contain non-finite values")
            if not np.all(np.isfinite(noise_values)) or np.any(noise_values <= 0):
                raise ValueError("noise values must be finite and positive")
        jitter = float(jitter)
        if jitter < 0 or not np.isfinite(jitter):
            raise ValueError("jitter must be finite and nonnegative")
        for arr in (locations, observations, noise_values):
            arr.flags.writeable = False
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "prior_mean", prior_mean)
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "observations", observations)
        object.__setattr__(self, "noise_values", noise_values)
        object.__setattr__(self, "jitter", jitter)
        if n == 0:
            object.__setattr__(self, "_cho", None)
            object.__setattr__(self, "_weights", None)
        else:
            gram = kernel.matrix(locations, locations)
            gram[np.diag_indices_from(gram)] += noise_values + jitter
            try:
                cho = cho_factor(gram, lower=True)
            except LinAlgError as err:
                cond = float(np.linalg.cond(gram))
                raise NumericalError(
                    f"Gram factorization failed at n={n} "
                    f"(condition estimate {cond:.3e}); consider a jitter"
                ) from err
            residual = observations - prior_mean(locations)
            object.__setattr__(self, "_cho", cho)
            object.__setattr__(self, "_weights", cho_solve(cho, residual))

    def __setattr__(self, name, value):
        raise AttributeError("GpPosterior is immutable")

    @property
    def n(self) -> int:
        """Number of observations."""
        return self.locations.shape[0]

    @property
    def dim(self) -> int:
        return self.kernel.dim

    def __repr__(self) -> str:
        return f"GpPosterior(kernel={self.kernel!r}, n={self.n})"

    # -- mean ------------------------------------------------------------

    def mean_at(self, X) -> np.ndarray:
        """Posterior means at rows of ``X``; shape (q,)."""
        X = _as_points(X, self.dim, "X")
        base = np.asarray(self.prior_mean(X), dtype=float).reshape(X.shape[0])
        if self.n == 0:
            return base
        return base + self.kernel.matrix(X, self.locations) @ self._weights

    def posterior_mean(self, x) -> float:
        """Posterior mean at a single point."""
        x = _as_vector(x, self.dim, "x")
        return float(self.mean_at(x[None, :])[0])

    # -- covariance --------------------------------------------------------

    def cov_vec(self, X, x) -> np.ndarray:
        """Posterior covariances cov(X[q], x); shape (q,)."""
        X = _as_points(X, self.dim, "X")
        x = _as_vector(x, self.dim, "x")
        prior = self.kernel.vec(X, x)
        if self.n == 0:
            return prior
        kxv = self.kernel.vec(self.locations, x)
        return prior - self.kernel.matrix(X, self.locations) @ cho_solve(self._cho, kxv)

    def posterior_cov(self, x, x_prime) -> float:
        """Posterior covariance between two points.

        The variance path (``x == x_prime``) is clamped at zero when tiny
        negative round-off appears.
        """
        x = _as_vector(x, self.dim, "x")
        xp = _as_vector(x_prime, self.dim, "x_prime")
        value = float(self.cov_vec(x[None, :], xp)[0])
        if np.array_equal(x, xp):
            value = self._clamp_var(np.asarray([value]))[0]
        return value

    def var_at(self, X) -> np.ndarray:
        """Posterior variances at rows of ``X``, clamped at zero; shape (q,)."""
        X = _as_points(X, self.dim, "X")
        q = X.shape[0]
        prior = np.full(q, self.kernel.tau_sq)
        if self.n == 0:
            return prior
        kXV = self.kernel.matrix(self.locations, X)
        solved = cho_solve(self._cho, kXV)
        raw = prior - np.einsum("nq,nq->q", kXV, solved)
        return self._clamp_var(raw)

    def posterior_var(self, x) -> float:
        x = _as_vector(x, self.dim, "x")
        return float(self.var_at(x[None, :])[0])

    @staticmethod
    def _clamp_var(raw: np.ndarray) -> np.ndarray:
        low = raw.min() if raw.size else 0.0
        if low < _VAR_CLAMP_FLOOR:
            raise NumericalError(
                f"posterior variance {low:.3e} below the round-off floor; "
                "the Gram system is badly conditioned"
            )
        if low < 0.0:
            LOGGER.debug("clamping posterior variance round-off %.3e to 0", low)
            return np.maximum(raw, 0.0)
        return raw

    # -- innovation scale ---------------------------------------------------

    def innovation_scale_vec(self, X, v, noise_at_v: float) -> np.ndarray:
        """How strongly one observation at ``v`` would move the means at ``X``.

        Returns ``cov(X[q], v) / sqrt(cov(v, v) + noise_at_v)`` for each row;
        the sign follows the sign of the covariance.
        """
        noise_at_v = float(noise_at_v)
        if not (np.isfinite(noise_at_v) and noise_at_v > 0):
            raise ValueError("noise_at_v must be finite and positive")
        v = _as_vector(v, self.dim, "v")
        denom = np.sqrt(self.var_at(v[None, :])[0] + noise_at_v)
        return self.cov_vec(X, v) / denom

    def innovation_scale(self, x, v, noise_at_v: float) -> float:
        """Scalar form of :meth:`innovation_scale_vec` at a single ``x``."""
        x = _as_vector(x, self.dim, "x")
        return float(self.innovation_scale_vec(x[None, :], v, noise_at_v)[0])

    # -- gradients ----------------------------------------------------------

    def cov_grad_batch(self, V, x):
        """Gradients of the posterior covariance with respect to ``x``.

        Parameters
        ----------
        V : array_like of shape (q, d)
            Fixed first arguments.
        x : array_like of shape (d,)
            The point being differentiated.

        Returns
        -------
        dk_vx : ndarray of shape (q, d)
            Row q is the gradient of cov(V[q], x) in x.
        dk_xx : ndarray of shape (d,)
            Gradient of the variance path cov(x, x) in x.
        """
        V = _as_points(V, self.dim, "V")
        x = _as_vector(x, self.dim, "x")
        prior_grads = self.kernel.grad_x_batch(V, x)
        if self.n == 0:
            return prior_grads, np.zeros(self.dim)
        # A^T = G^{-1} [grad_x k0(v_l, x)]_l stacked as rows, shape (n, d)
        At = cho_solve(self._cho, self.kernel.grad_x_batch(self.locations, x))
        dk_vx = prior_grads - self.kernel.matrix(V, self.locations) @ At
        kVx = self.kernel.vec(self.locations, x)
        dk_xx = -2.0 * (At.T @ kVx)
        return dk_vx, dk_xx

    def posterior_cov_grad(self, v, x):
        """Single-point form of :meth:`cov_grad_batch`."""
        v = _as_vector(v, self.dim, "v")
        dk_vx, dk_xx = self.cov_grad_batch(v[None, :], x)
        return dk_vx[0], dk_xx

    def innovation_scale_grad_batch(
        self, V, x, noise_at_x: float, noise_grad=None
    ) -> np.ndarray:
        """Gradient in the sampling location ``x`` of the innovation scale.

        Differentiates ``cov(V[q], x) / sqrt(cov(x, x) + noise(x))`` with
        respect to ``x`` by the quotient rule:

            scale' = s^{-1/2} dk_vx - (1/2) s^{-3/2} cov(v, x) (dk_xx + dnoise)

        with ``s = cov(x, x) + noise(x)``.

        Parameters
        ----------
        V : array_like of shape (q, d)
            Points whose means the observation would move.
        x : array_like of shape (d,)
            Candidate sampling location.
        noise_at_x : float
            Sampling variance at ``x``; must be positive.
        noise_grad : array_like of shape (d,), optional
            Gradient of the sampling-variance function at ``x``; zero
            vector for location-constant noise.
        """
        noise_at_x = float(noise_at_x)
        if not (np.isfinite(noise_at_x) and noise_at_x > 0):
            raise ValueError("noise_at_x must be finite and positive")
        x = _as_vector(x, self.dim, "x")
        if noise_grad is None:
            noise_grad = np.zeros(self.dim)
        else:
            noise_grad = _as_vector(noise_grad, self.dim, "noise_grad")
        dk_vx, dk_xx = self.cov_grad_batch(V, x)
        s = self.var_at(x[None, :])[0] + noise_at_x
        kvx = self.cov_vec(_as_points(V, self.dim, "V"), x)
        inv_sqrt = 1.0 / np.sqrt(s)
        return dk_vx * inv_sqrt - (0.5 * inv_sqrt / s) * kvx[:, None] * (
            dk_xx + noise_grad
        )[None, :]

    def innovation_scale_grad(self, v, x, noise_at_x: float, noise_grad=None) -> np.ndarray:
        """Single-point form of :meth:`innovation_scale_grad_batch`."""
        v = _as_vector(v, self.dim, "v")
        return self.innovation_scale_grad_batch(v[None, :], x, noise_at_x, noise_grad)[0]

    def innovation_terms(self, V, x, noise_at_x: float, noise_grad=None):
        """Innovation scale and its ``x``-gradient, sharing intermediates.

        Semantically identical to calling :meth:`innovation_scale_vec` and
        :meth:`innovation_scale_grad_batch` with ``v = x``, but the Gram
        solves and kernel evaluations are done once. This is the hot path
        of the acquisition-gradient oracle.

        Returns
        -------
        scale : ndarray of shape (q,)
        scale_grad : ndarray of shape (q, d)
        """
        noise_at_x = float(noise_at_x)
        if not (np.isfinite(noise_at_x) and noise_at_x > 0):
            raise ValueError("noise_at_x must be finite and positive")
        V = _as_points(V, self.dim, "V")
        x = _as_vector(x, self.dim, "x")
        if noise_grad is None:
            noise_grad = np.zeros(self.dim)
        else:
            noise_grad = _as_vector(noise_grad, self.dim, "noise_grad")
        prior_vec = self.kernel.vec(V, x)
        prior_grads = self.kernel.grad_x_batch(V, x)
        if self.n == 0:
            cov = prior_vec
            var_x = self.kernel.tau_sq
            dk_vx = prior_grads
            dk_xx = np.zeros(self.dim)
        else:
            kVx = self.kernel.vec(self.locations, x)
            w = cho_solve(self._cho, kVx)
            KQV = self.kernel.matrix(V, self.locations)
            cov = prior_vec - KQV @ w
            var_x = self._clamp_var(
                np.asarray([self.kernel.tau_sq - float(kVx @ w)])
            )[0]
            At = cho_solve(self._cho, self.kernel.grad_x_batch(self.locations, x))
            dk_vx = prior_grads - KQV @ At
            dk_xx = -2.0 * (At.T @ kVx)
        s = var_x + noise_at_x
        inv_sqrt = 1.0 / np.sqrt(s)
        scale = cov * inv_sqrt
        scale_grad = dk_vx * inv_sqrt - (0.5 * inv_sqrt / s) * cov[:, None] * (
            dk_xx + noise_grad
        )[None, :]
        return scale, scale_grad

    # -- updates --------------------------------------------------------------

    def update(self, obs: Observation) -> "GpPosterior":
        """Posterior with one more observation appended.

        The result equals the batch construction on the concatenated data;
        the factorization is rebuilt in full.
        """
        if not isinstance(obs, Observation):
            raise ValueError("update expects an Observation")
        if obs.location.shape != (self.dim,):
            raise ValueError(
                f"observation location has dimension {obs.location.shape[0]}, "
                f"posterior has {self.dim}"
            )
        return GpPosterior(
            self.kernel,
            self.prior_mean,
            np.vstack([self.locations, obs.location[None, :]]),
            np.append(self.observations, obs.value),
            np.append(self.noise_values, obs.noise),
            jitter=self.jitter,
        )

    # -- serialization -----------------------------------------------------------

    def to_record(self) -> dict:
        """JSON-compatible snapshot (kernel, prior mean, data, jitter)."""
        if not isinstance(self.prior_mean, ConstantMean):
            raise ValueError(
                "only constant prior means are serializable; got "
                f"{type(self.prior_mean).__name__}"
            )
        return {
            "kernel": self.kernel.to_config(),
            "prior_mean": self.prior_mean.to_spec(),
            "locations": self.locations.tolist(),
            "observations": self.observations.tolist(),
            "noise_values": self.noise_values.tolist(),
            "jitter": self.jitter,
        }

    @classmethod
    def from_record(cls, record: dict) -> "GpPosterior":
        kernel = Kernel.from_config(record["kernel"])
        return cls(
            kernel,
            ConstantMean.from_spec(record.get("prior_mean", {"kind": "zero"})),
            np.asarray(record.get("locations", []), dtype=float).reshape(-1, kernel.dim),
            record.get("observations", []),
            record.get("noise_values", []),
            jitter=record.get("jitter", 0.0),
        )
