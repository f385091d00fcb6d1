"""Fit a Gaussian-process posterior to noisy samples of a 1-d function.

The model behind every policy in this package is a GP per alternative with
known, possibly location-dependent observation noise. This script draws an
increasing number of noisy samples of a bumpy test function, folds them into
the posterior one at a time, and prints how the fit tightens. It ends with
the one-step "innovation" identity: how strongly one additional sample at a
chosen location would move the posterior mean everywhere else.
"""

import numpy as np

from ikg import GpPosterior, Kernel
from ikg.gp import Observation


def truth(x):
    return np.sin(x) + 0.25 * np.cos(3.0 * x)


def main():
    rng = np.random.default_rng(7)
    kernel = Kernel("matern52", 1.0, [1.0])
    noise = 0.05

    probes = np.linspace(0.0, 10.0, 6)[:, None]
    post = GpPosterior(kernel)

    print("posterior at 6 probe points as samples accumulate")
    print("n    " + "".join(f"{x[0]:>10.1f}" for x in probes))
    print("truth" + "".join(f"{truth(x[0]):>10.3f}" for x in probes))
    for n in range(1, 26):
        x = rng.uniform(0.0, 10.0, 1)
        y = truth(x[0]) + np.sqrt(noise) * rng.standard_normal()
        post = post.update(Observation(x, y, noise))
        if n in (1, 5, 10, 25):
            mean = post.mean_at(probes)
            sd = np.sqrt(post.var_at(probes))
            print(f"{n:<5d}" + "".join(f"{m:>10.3f}" for m in mean))
            print("  sd " + "".join(f"{s:>10.3f}" for s in sd))

    rmse = np.sqrt(np.mean((post.mean_at(probes) - truth(probes[:, 0])) ** 2))
    print(f"\nrmse at probes after 25 samples: {rmse:.3f}")

    # The innovation scale says how far the mean at each probe would move,
    # per standard normal unit, if we paid for one more sample at v. Where
    # the data already pin the function down, one more sample moves almost
    # nothing; at the most uncertain probe it still buys a real shift.
    most_uncertain = probes[int(np.argmax(post.var_at(probes)))]
    print("\ninnovation scale of one extra sample (how far the mean at each")
    print("probe would move, per standard normal unit)")
    print("probe      " + "".join(f"{x[0]:>10.1f}" for x in probes))
    for v in (np.array([5.0]), most_uncertain):
        scales = post.innovation_scale_vec(probes, v, noise)
        print(f"at x={v[0]:<4.1f}  " + "".join(f"{s:>10.3f}" for s in scales))
    print("\nthe acquisition rule integrates exactly this quantity, so it")
    print("steers samples toward locations that still move the posterior.")


if __name__ == "__main__":
    main()
