"""Estimate observation-noise variance instead of assuming it known.

The belief model treats the observation noise at each sampling location as
known. When it is not, a noiseless kriging interpolator is fitted to sample
variances taken at a small space-filling design, and the policy consults
that surface instead of the truth. This script fits the interpolator for
one alternative, prints predictions against the true variance near and far
from the design, and then runs two short policy loops, one with the true
variance and one with the estimate, to show the decisions stay comparable.
"""

import numpy as np

from ikg.experiments import (
    estimate_oc,
    fit_variance_model,
    latin_hypercube,
    make_problem,
)
from ikg.policies import PrsPolicy, run_budget_loop


def main():
    rng = np.random.default_rng(21)
    problem = make_problem("p1", 1)   # true variance is 0.01 everywhere

    design = latin_hypercube(10, problem.domain, rng)
    model = fit_variance_model(design, 200, problem, 0, rng, floor=1e-4)

    print("kriging fit of the noise variance (true value 0.01)")
    print(f"{'x':>6} {'predicted':>10} {'nearest design pt':>18}")
    for x in (0.2, 2.5, 5.0, 7.5, 9.8):
        gap = np.abs(design[:, 0] - x).min()
        pred = model.predict(np.array([x]))
        print(f"{x:>6.1f} {pred:>10.4f} {gap:>18.2f}")
    print("predictions track the truth near design points and relax toward")
    print("the floor far from them (the interpolator has a zero prior mean).\n")

    # Same budget loop with true and with estimated noise views. The loop
    # charges true costs and draws with true noise either way; only what
    # the belief update assumes about the noise changes.
    noise_view = [model.predict for _ in range(problem.M)]
    results = {}
    for label, view in (("known", None), ("estimated", noise_view)):
        record = run_budget_loop(
            PrsPolicy(), problem, 30.0,
            np.random.Generator(np.random.PCG64(np.random.SeedSequence(42))),
            noise_view=view,
        )
        points = problem.density.sample(problem.domain, 2000, rng)
        results[label] = estimate_oc(record.final_state, problem, points)
        print(f"{label:<10} noise: opportunity cost after budget 30 "
              f"= {results[label]:.4f}")

    ratio = results["estimated"] / results["known"]
    print(f"\nestimated/known opportunity-cost ratio: {ratio:.2f}")
    print("a modest design (10 points, 200 replications each) is enough for")
    print("the estimated-variance runs to stay close to the known-variance")
    print("runs on this problem.")


if __name__ == "__main__":
    main()
