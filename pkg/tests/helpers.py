"""Shared test utilities: finite differences and random belief states."""

from __future__ import annotations

import numpy as np

from ikg import BeliefState, Kernel, Observation


def central_diff(f, x, h: float = 1e-5) -> np.ndarray:
    """Componentwise central finite-difference gradient of a scalar f."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for j in range(x.size):
        step = np.zeros_like(x)
        step[j] = h
        grad[j] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad


def rel_err(got: np.ndarray, want: np.ndarray, floor: float = 1e-12) -> float:
    """Vector-norm relative error with an absolute floor."""
    got = np.atleast_1d(np.asarray(got, dtype=float))
    want = np.atleast_1d(np.asarray(want, dtype=float))
    return float(np.linalg.norm(got - want) / max(np.linalg.norm(want), floor))


def random_state(
    kernel: Kernel,
    num_alternatives: int,
    counts,
    rng: np.random.Generator,
    noise: float = 0.01,
    box=(0.0, 10.0),
    y_scale: float = 1.0,
) -> BeliefState:
    """Belief state with the given per-alternative observation counts,
    locations uniform in the box and standard-normal values."""
    state = BeliefState.fresh(kernel, num_alternatives)
    order = np.repeat(np.arange(num_alternatives), counts)
    rng.shuffle(order)
    lo, hi = box
    for i in order:
        x = rng.uniform(lo, hi, size=kernel.dim)
        y = y_scale * float(rng.standard_normal())
        state = state.update_with(int(i), Observation(x, y, noise), 1.0)
    return state
