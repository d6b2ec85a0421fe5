import math

import numpy as np
import pytest

from ureduce.design import (Design, build_deterministic, build_random, complete_design, count_subsets,
                            design_from_text, design_to_text, ell_max, read_design, verify_assumption2,
                            write_design)
from ureduce.errors import BudgetExceedsUniverse, DegenerateWindow, DesignError, InvalidRatio, UniverseTooLarge


def test_hand_enumerated_deterministic():
    d = build_deterministic(12, 2, 1.5, 0.75, 1.0)
    assert d.report["M"] == 3 and d.report["steps"] == [3, 3]
    expected = sorted(tuple(sorted((i, (i + 3) % 12))) for i in range(12))
    assert sorted(map(tuple, d.tuples.tolist())) == expected
    assert np.all(d.a1() == 2)
    assert d.a1().sum() == 24
    assert set(count_subsets(d, 2).counts.tolist()) == {1}
    assert count_subsets(d, 1).sum_sq == 48


@pytest.mark.parametrize("n", [50, 97, 200, 500])
@pytest.mark.parametrize("r,alpha", [(2, 1.5), (3, 1.5), (3, 1.4), (4, 1.3)])
def test_lemma2_properties(n, r, alpha):
    d = build_deterministic(n, r, alpha)
    for k in range(2, r + 1):
        assert count_subsets(d, k).counts.max() == 1
    a1 = d.a1()
    assert a1.max() / a1.min() <= 2


def test_deterministic_passes_assumption2():
    assert verify_assumption2(build_deterministic(200, 3, 1.5))["pass"]


def test_concentrated_design_fails_assumption2():
    n, r = 50, 3
    m = math.floor(n**1.5)
    d = Design(n, r, 1.5, np.tile(np.arange(r), (m, 1)), "J1")
    rep = verify_assumption2(d)
    assert not rep["pass"] and not rep["per_k"][0]["pass"]


def test_invalid_ratio_and_alpha():
    with pytest.raises(InvalidRatio):
        build_deterministic(100, 3, 1.5, 0.5, 1.0)
    with pytest.raises(DesignError):
        build_deterministic(100, 3, 3.5)
    with pytest.raises(DesignError):
        build_random("J1", 100, 3, 1.0, rng_seed=0)


def test_strict_bound():
    with pytest.raises(DegenerateWindow):
        build_deterministic(40, 3, 2.0, strict=True)


def test_j1_size():
    assert build_random("J1", 10, 3, 1.5, rng_seed=0).size == 31


@pytest.mark.parametrize("n,r,alpha", [(20, 2, 1.5), (37, 3, 1.8), (50, 4, 2.0)])
def test_j3_size(n, r, alpha):
    d = build_random("J3", n, r, alpha, rng_seed=1)
    assert d.size == n * math.floor(n ** (alpha - 1))
    # every anchor appears at least its own budget
    assert d.a1().min() >= math.floor(n ** (alpha - 1))


def test_j2_j4_no_duplicates():
    d2 = build_random("J2", 30, 3, 1.5, rng_seed=3)
    assert len(set(map(tuple, d2.tuples.tolist()))) == d2.size
    d4 = build_random("J4", 30, 3, 1.5, rng_seed=3)
    per = math.floor(30**0.5)
    for i in range(30):
        block = d4.tuples[i * per:(i + 1) * per]
        assert len(set(map(tuple, block.tolist()))) == per
        assert np.all((block == i).any(axis=1))


def test_j2_budget_exceeds_universe():
    with pytest.raises(BudgetExceedsUniverse):
        build_random("J2", 6, 3, 3.0, rng_seed=0)


def test_j1_a1_mean_over_seeds():
    n, r, alpha = 50, 3, 1.5
    m = math.floor(n**alpha)
    vals = np.array([build_random("J1", n, r, alpha, rng_seed=s).a1()[0] for s in range(2000)])
    target = r * m / n
    assert abs(vals.mean() - target) < 3 * vals.std(ddof=1) / math.sqrt(vals.size)


def test_complete_design():
    assert complete_design(4, 2).size == 6
    d = complete_design(5, 3)
    assert d.size == 10 and np.all(d.a1() == 6)
    assert complete_design(3, 3).tuples.tolist() == [[0, 1, 2]]
    assert set(count_subsets(d, 2).counts.tolist()) == {3}
    with pytest.raises(UniverseTooLarge):
        complete_design(1000, 4)


@pytest.mark.parametrize("scheme", ["J1", "J2", "J3", "J4"])
def test_random_tuples_sorted_distinct(scheme):
    d = build_random(scheme, 40, 3, 1.6, rng_seed=9)
    t = d.tuples
    assert np.all(np.diff(t, axis=1) > 0) and t.min() >= 0 and t.max() < 40


@pytest.mark.parametrize("scheme", ["J1", "J2", "J3", "J4"])
def test_lemma3_pass_rate(scheme):
    passed = sum(verify_assumption2(build_random(scheme, 100, 3, 1.5, rng_seed=s))["pass"] for s in range(100))
    assert passed >= 99


def test_text_round_trip(tmp_path):
    for d in (build_deterministic(30, 3, 1.5), build_random("J1", 30, 3, 1.5, rng_seed=4), complete_design(6, 2)):
        back = design_from_text(design_to_text(d))
        assert back.n == d.n and back.r == d.r and back.alpha == d.alpha
        assert back.scheme == d.scheme and back.seed == d.seed
        assert np.array_equal(back.tuples, d.tuples)
    path = tmp_path / "d.txt"
    write_design(d, path)
    assert np.array_equal(read_design(path).tuples, d.tuples)


def test_text_rejects_bad_tuples():
    with pytest.raises(DesignError):
        design_from_text("# n=3\n# r=2\n# alpha=1.5\n# scheme=J1\n1 4\n")


def test_ell_max():
    from fractions import Fraction
    assert (ell_max(1.5), ell_max(1.2), ell_max(2)) == (1, 3, 1)
    assert ell_max(Fraction(4, 3)) == 2
    assert ell_max(Fraction(5, 4)) == 2 and ell_max(1.25) == 2
