"""Detecting a degenerate kernel and testing with the matching studentization.

The kernel 27 prod(sin(2 X_i) - sin(1)^2) has mean zero under the uniform law
on [0, 1] and vanishing first and second projections. ``detect_k0`` reads
the degeneracy order off the window estimates of xi_k^2, and the degenerate
pipeline (random design, kernel-variance studentization) then gives a
level-0.1 interval. A user-defined nondegenerate kernel (three times the
sum of the points, xi_1^2 = 0.75) on the same data is shown for contrast.
"""

import numpy as np

from ureduce.design import build_random
from ureduce.inference import ci_degenerate_random, detect_k0
from ureduce.kernels import Kernel, builtin_kernel

n, alpha = 200, 2.0
X = np.random.default_rng(5).random((n, 1))
scaled_sum = Kernel("scaled_sum", 3, lambda pts: 3.0 * pts.sum(axis=(-2, -1)))
for k in (scaled_sum, builtin_kernel("degenerate_product")):
    k0, xi, thr = detect_k0(X, k, alpha, return_estimates=True)
    print(f"{k.name:<20} k0 = {k0}   xi~_k^2 = {np.round(xi, 4).tolist()}   threshold^2 = {thr**2:.4f}")

k = builtin_kernel("degenerate_product")
d = build_random("J1", n, 3, 1.5, rng_seed=2)
rep = ci_degenerate_random(X, k, d, beta=0.1, rng_seed=3)
print(f"\ndegenerate interval for the (zero) mean: [{rep.ci_low:.4f}, {rep.ci_high:.4f}]")
