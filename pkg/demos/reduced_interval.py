"""Interval for the mean of a degree-3 kernel from a reduced design.

A sample of 300 points from the density (x+1)/2 on [-1, 1] is summarized by
the sin-sum kernel. The complete U-statistic would need C(300, 3) = 4.5e6
kernel calls; the deterministic design uses about n^1.5 of them.

Run with ``python3 demos/reduced_interval.py``.
"""

import math

import numpy as np

from ureduce.design import build_deterministic
from ureduce.inference import ci_nondegenerate, pvalue_nondegenerate
from ureduce.kernels import CountingKernel, builtin_kernel
from ureduce.validate import complete_U, make_law, true_mean

n, alpha = 300, 1.5
law = make_law("linear")
X = law.sample(np.random.default_rng(7), n)
kernel = CountingKernel.wrap(builtin_kernel("sin_sum"))
mu = true_mean(law, builtin_kernel("sin_sum"))[0]

design = build_deterministic(n, 3, alpha)
rep = ci_nondegenerate(X, kernel, design, beta=0.1, rng_seed=1)
print(f"design: {design.size} tuples, a_1 in [{design.a1().min()}, {design.a1().max()}]")
print(f"kernel calls: {kernel.calls}  (n^alpha = {n**alpha:.0f}, C(n,3) = {math.comb(n, 3)})")
print(f"U_J = {rep.estimate:.5f}   90% interval [{rep.ci_low:.5f}, {rep.ci_high:.5f}]")
print(f"complete U_n = {complete_U(X, builtin_kernel('sin_sum')):.5f}   true mean = {mu:.5f}")

p = pvalue_nondegenerate(X, builtin_kernel("sin_sum"), design, mu0=mu, rng_seed=1)
print(f"two-sided p-value at the true mean: {p.pvalue:.3f}")
