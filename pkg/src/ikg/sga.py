"""Projected stochastic gradient ascent over a box, with iterate averaging.

The acquisition surface being maximized is only available through noisy
per-draw gradients, so the optimizer is the classical projected scheme

    x_{k+1} = project(x_k + b_k * g_k),    b_k = step_scale / k**step_exponent,

where ``g_k`` averages ``batch_size`` fresh single-draw gradients. The
exponent is restricted to (0.5, 1] so the step sums diverge while their
squares converge. The returned solution is the average of the late
iterates ``x_{K0} .. x_{K+1}`` rather than the final point, which damps
the residual gradient noise.

A deterministic companion, :func:`optimize_saa`, maximizes a frozen
sample-average objective by multistart projected gradient ascent with
backtracking line search. It exists for optimizer-comparison experiments,
not for production decisions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError
from .kernels import _as_vector

__all__ = ["BoxDomain", "SgaConfig", "SgaResult", "project", "optimize", "optimize_saa"]


class BoxDomain:
    """Axis-aligned box ``[lower_j, upper_j]`` in R^d with nonempty interior."""

    __slots__ = ("lower", "upper")

    def __init__(self, lower, upper) -> None:
        lower = np.atleast_1d(np.asarray(lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(upper, dtype=float)).copy()
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("box bounds must be finite")
        if not np.all(lower < upper):
            raise ValueError("box must satisfy lower < upper componentwise")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def __setattr__(self, name, value):
        raise AttributeError("BoxDomain is immutable")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def __repr__(self) -> str:
        return f"BoxDomain({self.lower.tolist()!r}, {self.upper.tolist()!r})"

    def project(self, x) -> np.ndarray:
        """Componentwise clamp onto the box; identity on interior points."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point must have shape ({self.dim},), got {x.shape}")
        return np.clip(x, self.lower, self.upper)

    def contains(self, x, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol)
        )

    def sample_uniform(self, rng: np.random.Generator, count: int | None = None):
        """Uniform draw(s): shape (d,) for count=None, else (count, d)."""
        size = (self.dim,) if count is None else (int(count), self.dim)
        return self.lower + (self.upper - self.lower) * rng.random(size)


def project(x, domain: BoxDomain) -> np.ndarray:
    """Functional alias for :meth:`BoxDomain.project`."""
    return domain.project(x)


@dataclass(frozen=True)
class SgaConfig:
    """Schedule and batch parameters for :func:`optimize`.

    ``max_iters = 0`` is allowed and makes the solution equal the initial
    point (no ascent steps); it exists so the random-candidate baseline is
    expressible as the degenerate schedule.
    """

    max_iters: int
    averaging_start: int
    step_scale: float
    step_exponent: float
    batch_size: int
    init: str | np.ndarray = "uniform"
    keep_trace: bool = False

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ValueError("max_iters must be a nonnegative integer")
        hi = max(int(self.max_iters), 1)
        if not 1 <= int(self.averaging_start) <= hi:
            raise ValueError(
                f"averaging_start must lie in [1, {hi}] for max_iters={self.max_iters}"
            )
        if not (np.isfinite(self.step_scale) and self.step_scale > 0):
            raise ValueError("step_scale must be positive")
        # (0.5, 1] makes sum(b_k) diverge while sum(b_k^2) stays finite.
        if not 0.5 < self.step_exponent <= 1.0:
            raise ValueError("step_exponent must lie in (0.5, 1]")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ValueError("batch_size must be a positive integer")
        if isinstance(self.init, str):
            if self.init != "uniform":
                raise ValueError("init must be 'uniform' or an explicit point")
        else:
            pt = np.asarray(self.init, dtype=float)
            if pt.ndim != 1 or not np.all(np.isfinite(pt)):
                raise ValueError("explicit init must be a finite 1-d point")
            object.__setattr__(self, "init", pt)

    @classmethod
    def defaults(cls, d: int, **overrides) -> "SgaConfig":
        """Benchmark defaults scaled by the covariate dimension:
        K = 100d iterations, averaging from K/4, steps 200d / k^0.7,
        mini-batches of 20d draws."""
        if d < 1:
            raise ValueError("dimension must be at least 1")
        base = dict(
            max_iters=100 * d,
            averaging_start=max(1, (100 * d) // 4),
            step_scale=200.0 * d,
            step_exponent=0.7,
            batch_size=20 * d,
        )
        base.update(overrides)
        return cls(**base)

    def step_size(self, k: int) -> float:
        return self.step_scale / k**self.step_exponent


@dataclass(frozen=True)
class SgaResult:
    solution: np.ndarray
    init_point: np.ndarray
    iterate_trace: list | None = None


def optimize(grad_oracle, domain: BoxDomain, cfg: SgaConfig,
             rng: np.random.Generator) -> SgaResult:
    """Run the projected ascent and return the averaged late iterates.

    Parameters
    ----------
    grad_oracle : callable
        ``grad_oracle(x, rng) -> (d,) ndarray``, the mini-batch-averaged
        ascent direction at ``x``. Fresh draws must come from the passed
        ``rng`` so runs are replayable.
    domain : BoxDomain
    cfg : SgaConfig
    rng : numpy Generator
        Consumed first for the uniform initial point (when configured),
        then by the oracle calls in iteration order.

    Returns
    -------
    SgaResult
        ``solution`` averages iterates ``averaging_start .. max_iters+1``
        (both ends inclusive) and lies in the box.
    """
    d = domain.dim
    if isinstance(cfg.init, str):
        x = domain.sample_uniform(rng)
    else:
        x = _as_vector(cfg.init, d, "init")
        x = domain.project(x)
    init_point = x.copy()
    total = int(cfg.max_iters)
    avg_from = 1 if total == 0 else int(cfg.averaging_start)
    accum = np.zeros(d)
    taken = 0
    if avg_from <= 1:
        accum += x
        taken += 1
    trace = [x.copy()] if cfg.keep_trace else None
    for k in range(1, total + 1):
        grad = np.asarray(grad_oracle(x, rng), dtype=float)
        if grad.shape != (d,) or not np.all(np.isfinite(grad)):
            raise NumericalError(
                f"gradient oracle returned a non-finite or misshaped value "
                f"at iteration {k}"
            )
        x = domain.project(x + cfg.step_size(k) * grad)
        if trace is not None:
            trace.append(x.copy())
        if k + 1 >= avg_from:
            accum += x
            taken += 1
    expected = total + 2 - avg_from
    if taken != expected:
        raise AssertionError(f"averaging window bookkeeping: {taken} != {expected}")
    solution = domain.project(accum / taken)
    return SgaResult(solution=solution, init_point=init_point, iterate_trace=trace)


def optimize_saa(
    objective,
    domain: BoxDomain,
    multistart: int,
    rng: np.random.Generator,
    init=None,
    max_iters: int = 200,
    step_tol: float = 1e-10,
) -> np.ndarray:
    """Deterministic multistart ascent on a frozen sample-average objective.

    Parameters
    ----------
    objective : callable
        ``objective(x) -> (value, (d,) gradient)`` of the frozen-sample
        surface; must be deterministic.
    multistart : int
        Number of starts. The first uses ``init`` when given; the rest are
        uniform draws from ``rng``, taken in order, so enlarging
        ``multistart`` with the same seed only appends starts.

    Returns
    -------
    ndarray
        The best point found across starts.

    Notes
    -----
    Line search is backtracking-by-halving from step 1.0 with the
    sufficient-ascent constant 1e-4 and at most 50 halvings per step.
    """
    if int(multistart) != multistart or multistart < 1:
        raise ValueError("multistart must be a positive integer")
    best_x = None
    best_value = -np.inf
    for start in range(int(multistart)):
        if start == 0 and init is not None:
            x0 = domain.project(_as_vector(init, domain.dim, "init"))
        else:
            x0 = domain.sample_uniform(rng)
        x, value = _ascend_frozen(objective, domain, x0, max_iters, step_tol)
        if value > best_value or best_x is None:
            best_x, best_value = x, value
    return best_x


def _ascend_frozen(objective, domain, x0, max_iters, step_tol):
    x = np.asarray(x0, dtype=float)
    value, grad = objective(x)
    for _ in range(max_iters):
        step = 1.0
        accepted = None
        for _ in range(50):
            candidate = domain.project(x + step * np.asarray(grad, dtype=float))
            move = candidate - x
            move_norm = float(np.linalg.norm(move))
            if move_norm == 0.0:
                break
            cand_value, cand_grad = objective(candidate)
            if cand_value >= value + 1e-4 * float(np.dot(grad, move)):
                accepted = (candidate, cand_value, cand_grad, move_norm)
                break
            step *= 0.5
        if accepted is None:
            break
        x, value, grad, moved = accepted
        if moved < step_tol:
            break
    return x, value
