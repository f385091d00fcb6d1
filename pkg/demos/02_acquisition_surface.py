"""Scan the acquisition surface that drives the sampling policy.

Given a belief over several alternatives, the policy scores a candidate
sample (i, x) by the expected improvement of its final decisions, averaged
over the covariate distribution, per unit sampling cost. This script builds
a small belief from a handful of observations, sweeps x over the box for
each alternative, and prints the surface twice: once from the deterministic
quadrature reference and once from the Monte-Carlo estimator the policy
actually uses. It closes by dividing by a nonuniform cost to show how the
best candidate moves toward cheaper locations.
"""

import math

import numpy as np

from ikg import log_ikg_estimate, ikg_quadrature_reference
from ikg.experiments import make_problem
from ikg.gp import Observation


def main():
    rng = np.random.default_rng(11)
    problem = make_problem("p1", 1, M=3)
    state = problem.fresh_state()
    for _ in range(15):
        i = int(rng.integers(problem.M))
        x = problem.domain.sample_uniform(rng)
        y = problem.sample_observation(i, x, rng)
        state = state.update_with(
            i, Observation(x, y, problem.noise(i, x)), problem.cost(i, x)
        )

    noise_fns = problem.noise_fns()
    unit_cost = lambda x: 1.0
    draws = problem.density.sample(problem.domain, 4000, rng)
    grid = np.linspace(0.5, 9.5, 10)

    print("acquisition value of sampling alternative i at location x")
    print("(top: quadrature reference, bottom: monte-carlo estimate, x1000)\n")
    print("i/x " + "".join(f"{g:>7.1f}" for g in grid))
    best = (None, None, -math.inf)
    for i in range(problem.M):
        quad = [
            ikg_quadrature_reference(
                state, i, np.array([g]), problem.density, problem.domain,
                noise_fns[i], unit_cost,
            )
            for g in grid
        ]
        mc = [
            math.exp(
                log_ikg_estimate(
                    state, i, np.array([g]), draws, noise_fns[i], unit_cost
                ).log_value
            )
            for g in grid
        ]
        print(f"q{i}  " + "".join(f"{v * 1e3:>7.2f}" for v in quad))
        print(f"m{i}  " + "".join(f"{v * 1e3:>7.2f}" for v in mc))
        top = int(np.argmax(quad))
        if quad[top] > best[2]:
            best = (i, grid[top], quad[top])
    print(f"\nbest candidate: alternative {best[0]} near x = {best[1]:.1f}")

    # A cost that grows away from x = 8 drags the optimum toward cheap ground.
    expensive = lambda x: 1.0 + 0.5 * float((x[0] - 8.0) ** 2)
    print("\nsame surface for the best alternative, divided by a cost that")
    print("is cheapest at x = 8 (values x1000):")
    i = best[0]
    scored = [
        ikg_quadrature_reference(
            state, i, np.array([g]), problem.density, problem.domain,
            noise_fns[i], expensive,
        )
        for g in grid
    ]
    print("x   " + "".join(f"{g:>7.1f}" for g in grid))
    print("val " + "".join(f"{v * 1e3:>7.2f}" for v in scored))
    print(f"new optimum near x = {grid[int(np.argmax(scored))]:.1f}")


if __name__ == "__main__":
    main()
