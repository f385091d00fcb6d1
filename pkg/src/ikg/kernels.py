"""Stationary covariance kernels with analytic input-space gradients.

Every kernel here has the form

    k(x, x') = tau_sq * rho(r),    r = sqrt(sum_j alpha_j * (x_j - x'_j)**2),

where ``rho`` is one of three radial profiles:

==========  =====================================================
family      rho(r)
==========  =====================================================
se          exp(-r**2)
matern32    (1 + sqrt(3)*r) * exp(-sqrt(3)*r)
matern52    (1 + sqrt(5)*r + (5/3)*r**2) * exp(-sqrt(5)*r)
==========  =====================================================

All three profiles are continuously differentiable, which is what the
acquisition-gradient machinery needs. The gradient of ``k(v, x)`` with
respect to ``x`` factors as

    grad_x k(v, x) = c(r) * (alpha * (x - v)),

with a family-specific scalar coefficient ``c(r)`` that stays finite as
``r -> 0`` (the apparent ``1/r`` in the Matern radial derivatives cancels),
so the gradient vanishes smoothly at ``x = v``. The exponent-1/2 Matern
profile is not differentiable at coincidence and is deliberately not
offered.

Kernels are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["Kernel", "SUPPORTED_FAMILIES"]

SUPPORTED_FAMILIES = ("se", "matern32", "matern52")

_SQRT3 = math.sqrt(3.0)
_SQRT5 = math.sqrt(5.0)

# Below this scaled distance the gradient is returned as exact zero; the
# closed forms are finite there but 0 * large intermediates are avoided.
_COINCIDENT_R = 1e-12


def _as_vector(x, d: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise ValueError(f"{name} must be a length-{d} vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return x


def _as_points(X, d: int, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError(f"{name} must have shape (n, {d}), got {np.shape(X)}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return X


class Kernel:
    """A stationary covariance on R^d.

    Parameters
    ----------
    family : str
        One of ``"se"``, ``"matern32"``, ``"matern52"``.
    tau_sq : float
        Stationary variance ``k(x, x)``. Must be positive.
    alpha : array_like of shape (d,)
        Per-coordinate inverse-squared length scales entering the scaled
        distance. All entries must be positive.

    Notes
    -----
    Parameters are fixed at construction; there is no hyperparameter
    fitting in this package. Values satisfy ``0 < k(x, x') <= tau_sq``
    with equality on the diagonal, and decay monotonically as any
    coordinate gap grows.
    """

    __slots__ = ("family", "tau_sq", "alpha")

    def __init__(self, family: str, tau_sq: float, alpha) -> None:
        if family not in SUPPORTED_FAMILIES:
            raise ValueError(
                f"unsupported kernel family {family!r}; expected one of "
                f"{SUPPORTED_FAMILIES} (other Matern exponents are not implemented)"
            )
        tau_sq = float(tau_sq)
        if not (math.isfinite(tau_sq) and tau_sq > 0):
            raise ValueError("tau_sq must be finite and positive")
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float)).copy()
        if alpha.ndim != 1 or alpha.size == 0:
            raise ValueError("alpha must be a nonempty 1-d array")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
            raise ValueError("alpha entries must be finite and positive")
        alpha.flags.writeable = False
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "tau_sq", tau_sq)
        object.__setattr__(self, "alpha", alpha)

    def __setattr__(self, name, value):
        raise AttributeError("Kernel is immutable")

    @property
    def dim(self) -> int:
        return self.alpha.size

    def __repr__(self) -> str:
        return (
            f"Kernel(family={self.family!r}, tau_sq={self.tau_sq!r}, "
            f"alpha={self.alpha.tolist()!r})"
        )

    # -- evaluation ----------------------------------------------------

    def _scaled_sq_dists(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        # Expansion form r^2 = |a|^2 + |b|^2 - 2 a.b in the alpha metric;
        # cancellation can leave tiny negatives, clipped to zero.
        Aw = A * self.alpha
        sq = (
            (A * Aw).sum(axis=1)[:, None]
            + (B * B * self.alpha).sum(axis=1)[None, :]
            - 2.0 * (Aw @ B.T)
        )
        sq = np.maximum(sq, 0.0)
        if A is B:
            # Blocked matrix products are not exactly symmetric; restore the
            # analytic symmetry and the zero diagonal of a square form.
            sq = 0.5 * (sq + sq.T)
            np.fill_diagonal(sq, 0.0)
        return sq

    def _values_from_sq(self, r_sq: np.ndarray) -> np.ndarray:
        if self.family == "se":
            return self.tau_sq * np.exp(-r_sq)
        r = np.sqrt(r_sq)
        if self.family == "matern32":
            return self.tau_sq * (1.0 + _SQRT3 * r) * np.exp(-_SQRT3 * r)
        return (
            self.tau_sq
            * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r_sq)
            * np.exp(-_SQRT5 * r)
        )

    def __call__(self, x, x_prime) -> float:
        """Covariance between two points."""
        d = self.dim
        x = _as_vector(x, d, "x")
        xp = _as_vector(x_prime, d, "x_prime")
        diff = x - xp
        r_sq = float(np.dot(self.alpha, diff * diff))
        return float(self._values_from_sq(np.asarray(r_sq)))

    def matrix(self, rows, cols) -> np.ndarray:
        """Cross-covariance matrix with entry (p, q) = k(rows[p], cols[q])."""
        d = self.dim
        A = _as_points(rows, d, "rows")
        B = _as_points(cols, d, "cols")
        return self._values_from_sq(self._scaled_sq_dists(A, B))

    def vec(self, points, x) -> np.ndarray:
        """Covariances k(points[q], x) as a flat vector."""
        d = self.dim
        P = _as_points(points, d, "points")
        x = _as_vector(x, d, "x")
        diff = P - x[None, :]
        r_sq = (diff * diff) @ self.alpha
        return self._values_from_sq(np.maximum(r_sq, 0.0))

    # -- gradients -----------------------------------------------------

    def _grad_coeff(self, r: np.ndarray) -> np.ndarray:
        if self.family == "se":
            return -2.0 * self.tau_sq * np.exp(-r * r)
        if self.family == "matern32":
            return -3.0 * self.tau_sq * np.exp(-_SQRT3 * r)
        return (
            -(5.0 / 3.0)
            * self.tau_sq
            * (1.0 + _SQRT5 * r)
            * np.exp(-_SQRT5 * r)
        )

    def grad_x(self, v, x) -> np.ndarray:
        """Gradient of k(v, x) with respect to x; zero vector at x = v."""
        return self.grad_x_batch(np.asarray(v, dtype=float)[None, :], x)[0]

    def grad_x_batch(self, V, x) -> np.ndarray:
        """Row q holds the gradient of k(V[q], x) with respect to x.

        Parameters
        ----------
        V : array_like of shape (q, d)
        x : array_like of shape (d,)

        Returns
        -------
        ndarray of shape (q, d)
        """
        d = self.dim
        V = _as_points(V, d, "V")
        x = _as_vector(x, d, "x")
        diff = x[None, :] - V
        r = np.sqrt(np.maximum((diff * diff) @ self.alpha, 0.0))
        coeff = np.where(r < _COINCIDENT_R, 0.0, self._grad_coeff(r))
        return coeff[:, None] * (self.alpha[None, :] * diff)

    # -- config round trip ----------------------------------------------

    def to_config(self) -> dict:
        return {
            "family": self.family,
            "tau_sq": self.tau_sq,
            "alpha": self.alpha.tolist(),
        }

    @classmethod
    def from_config(cls, spec: dict) -> "Kernel":
        if not isinstance(spec, dict):
            raise ValueError("kernel spec must be a mapping")
        extra = set(spec) - {"family", "tau_sq", "alpha"}
        if extra:
            raise ValueError(f"unknown kernel spec keys: {sorted(extra)}")
        try:
            return cls(spec["family"], spec["tau_sq"], spec["alpha"])
        except KeyError as missing:
            raise ValueError(f"kernel spec missing key {missing}") from None
