import math

import numpy as np
import pytest

from ureduce.errors import ArityMismatch, DimensionMismatch, UnknownKernel
from ureduce.kernels import (BUILTIN_KERNELS, CountingKernel, Kernel, as_dataset, builtin_kernel,
                             check_symmetry, eval_batch, eval_kernel)


def test_sign_symmetry_examples():
    k = builtin_kernel("sign_symmetry")
    assert eval_kernel(k, [1, 2, 3]) == 0.0
    assert eval_kernel(k, [4, 4, 4]) == 0.0
    # 2a-b-c > 0, the other two negative
    assert eval_kernel(k, [5, 0, 1]) == -1.0


def test_sin_sum_zero():
    assert eval_kernel(builtin_kernel("sin_sum"), [0, 0, 0]) == 0.0


def test_degenerate_product_value():
    k = builtin_kernel("degenerate_product")
    expected = 27 * (1 - math.sin(1) ** 2) ** 3
    assert eval_kernel(k, [math.pi / 4] * 3) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.6716, abs=1e-3)


def test_treatment_count_all_positive():
    k = builtin_kernel("treatment_count", r=4, r_lo=1, r_hi=4)
    assert eval_kernel(k, [0.3, 1.2, 2.0, 5.0]) == 4.0


def test_treatment_count_window():
    # ranks by |y|: -0.1, 0.2, -0.5, 0.9; window 2..3 holds 0.2 and -0.5
    k = builtin_kernel("treatment_count", r=4, r_lo=2, r_hi=3)
    assert eval_kernel(k, [0.9, -0.5, 0.2, -0.1]) == 1.0


def test_bergsma_dassios_identical_pairs():
    k = builtin_kernel("bergsma_dassios")
    assert eval_kernel(k, [[1.0, 2.0]] * 4) == 0.0


def test_dcov_identical_pairs():
    assert eval_kernel(builtin_kernel("dcov"), [[0.5, -1.0]] * 4) == 0.0


def test_unknown_kernel():
    with pytest.raises(UnknownKernel):
        builtin_kernel("nope")


def test_arity_and_dimension_errors():
    k = builtin_kernel("sin_sum")
    with pytest.raises(ArityMismatch):
        eval_kernel(k, [1, 2])
    with pytest.raises(DimensionMismatch):
        eval_kernel(k, [[1, 2], [1, 2], [3]])
    with pytest.raises(DimensionMismatch):
        as_dataset(np.zeros((2, 2, 2)))


@pytest.mark.parametrize("name", BUILTIN_KERNELS)
def test_builtins_symmetric(name, rng):
    k = builtin_kernel(name)
    p = 2 if name in ("bergsma_dassios", "dcov") else 1
    pts = rng.normal(size=(k.degree, p))
    assert check_symmetry(k, list(pts), trials=50)


def test_asymmetric_detected():
    k = Kernel("first", 2, lambda pts: pts[..., 0, 0])
    assert not check_symmetry(k, [0.0, 1.0], trials=10)


def test_treatment_count_symmetric_on_distinct():
    k = builtin_kernel("treatment_count", r=3, r_lo=1, r_hi=2)
    assert check_symmetry(k, [0.4, -1.3, 2.2], trials=30)


def test_eval_is_pure(rng):
    k = builtin_kernel("dcov")
    pts = rng.normal(size=(4, 2))
    assert eval_kernel(k, pts) == eval_kernel(k, pts)


def test_counting_kernel():
    k = CountingKernel.wrap(builtin_kernel("sin_sum"))
    eval_batch(k, np.zeros((7, 5, 3, 1)))
    assert k.calls == 35
    k.reset()
    assert k.calls == 0


def test_batch_matches_single(rng):
    k = builtin_kernel("bergsma_dassios")
    pts = rng.normal(size=(6, 4, 2))
    batch = eval_batch(k, pts)
    assert np.allclose(batch, [eval_kernel(k, p) for p in pts], rtol=0, atol=1e-15)
