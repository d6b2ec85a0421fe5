import math

import numpy as np
import pytest
from scipy.stats import norm

from ureduce.design import build_deterministic, build_random, complete_design
from ureduce.edgeworth import (Expansion, edgeworth_degenerate, edgeworth_deterministic, edgeworth_general,
                               edgeworth_network, edgeworth_random, evaluate, expansion_for_design,
                               gammas_deterministic, gammas_random, grid_pairs, hermite, hermite_poly,
                               normal_expansion)
from ureduce.errors import NonpositiveVariance
from ureduce.estimate import estimate_moments
from ureduce.kernels import builtin_kernel
from ureduce.validate import law_oracle, make_law


class M:
    """Moment bundle with the attribute names the expansions read."""

    def __init__(self, xi1_sq=1.0, xik_sq=(0.0, 0.0), g1_cubed=0.0, g1g1g2=0.0, sigma_h_sq=None):
        self.xi1_sq, self.xik_sq, self.g1_cubed, self.g1g1g2 = xi1_sq, list(xik_sq), g1_cubed, g1g1g2
        r = len(self.xik_sq) + 1
        self.sigma_h_sq = sigma_h_sq if sigma_h_sq is not None else (
            r * xi1_sq + sum(math.comb(r, k + 2) * v for k, v in enumerate(self.xik_sq)))


U = np.linspace(-3, 3, 25)


def test_hermite_values():
    assert hermite(1, 0.7) == 0.7
    assert hermite(2, 0.7) == pytest.approx(0.7**2 - 1)
    assert hermite(3, 2.0) == 2.0
    assert hermite(5, 0.0) == 0.0


@pytest.mark.parametrize("k", range(1, 8))
def test_hermite_derivative_identity(k):
    h = 1e-6
    fd = (hermite(k, U + h) - hermite(k, U - h)) / (2 * h)
    assert np.allclose(fd, k * hermite(k - 1, U), atol=1e-6 * max(1, k**3))
    assert np.allclose(hermite_poly(k)(U), hermite(k, U), atol=1e-9)


def test_normal_kind_is_phi():
    e = normal_expansion(50)
    assert evaluate(e, 0.0) == 0.5
    assert np.array_equal(evaluate(e, U), norm.cdf(U))


def test_zero_moments_collapse_to_phi():
    d = build_deterministic(60, 3, 1.5)
    zero = M(1.0, (0.0, 0.0), 0.0, 0.0, 3.0)
    for e in (edgeworth_general(d, zero), edgeworth_deterministic(d, zero),
              edgeworth_random("J1", zero, 3, 60, 1.5), edgeworth_random("J3", zero, 3, 60, 1.5),
              edgeworth_network(zero, 60, 3), edgeworth_degenerate(0.0, 1.0, 900)):
        assert np.max(np.abs(evaluate(e, U) - norm.cdf(U))) <= 1e-15


def test_L_values():
    d = build_deterministic(60, 3, 1.5)
    assert edgeworth_general(d, M()).L == 1
    assert edgeworth_random("J1", M(), 3, 100, 1.2).L == 3
    assert edgeworth_random("J1", M(), 3, 100, 2.0).L == 1


def test_gammas_deterministic_examples():
    g0, c = gammas_deterministic(M(1.0, (0.0, 0.0), 0.0, 0.0, 3.0), 3, 0.0, 1.0, 2)
    assert g0 == (0.0, 0.0, 0.0) and c == (0.0, 0.0)
    _, c = gammas_deterministic(M(1.0, (0.0, 0.0), 0.0, 0.0, 4.0), 3, 0.75, 1.0, 1)
    assert c[0] == pytest.approx(-4 / 9)
    e = Expansion("deterministic", 100, 0.1, (0.0,), c, 7.0, 1)
    assert e.gamma_poly(1)(1.3) == pytest.approx(-(4 / 9) * 1.3 / 2)


def test_gammas_random_examples():
    n, alpha = 100, 1.5
    _, _, Mj1, _ = gammas_random("J1", M(1.0, (0.0,)), 2, n, alpha)
    base = n ** (alpha - 1)
    assert Mj1 == pytest.approx(base * (1 + 1 / (2 * base)))
    m3 = M(0.8, (0.2, 0.05), 0.3, -0.1)
    assert gammas_random("J1", m3, 3, n, alpha)[1] == gammas_random("J3", m3, 3, n, alpha)[1]
    # r=2 J3 second weight (14u^2 + 2)/16 on E g1g1g2
    g0, _, _, _ = gammas_random("J3", M(1.0, (0.0,), 0.0, 1.0), 2, n, alpha)
    assert g0[2] == pytest.approx(14 / 16) and g0[0] == pytest.approx(2 / 16)


def test_degenerate_examples():
    e = edgeworth_degenerate(1.0, 1.0, 900)
    assert evaluate(e, 0.0) - 0.5 == pytest.approx(norm.pdf(0) / 180, rel=1e-12)
    assert evaluate(e, 0.0) - 0.5 == pytest.approx(2.216e-3, abs=1e-6)
    d_pos = evaluate(e, U) - norm.cdf(U)
    d_neg = evaluate(e, -U) - norm.cdf(-U)
    assert np.max(np.abs(d_pos - d_neg)) <= 1e-14
    with pytest.raises(NonpositiveVariance):
        edgeworth_degenerate(1.0, 0.0, 10)


def test_network_examples():
    m = M(0.5, (0.1,), 0.2, -0.05)
    n, r = 100, 3
    e = edgeworth_network(m, n, r)
    expected = 0.5 + norm.pdf(0) / (math.sqrt(n) * 0.5**1.5) * (0.2 / 6 + (r - 1) * -0.05 / 2)
    assert evaluate(e, 0.0) == pytest.approx(expected, rel=1e-13)
    g0_det, _ = gammas_deterministic(m, r, 0.0, 1.0, 0)
    assert e.gamma0 == g0_det and e.lead_scale == n**-0.5


def test_prototype_assembly():
    e = Expansion("J1", 50, 50**-0.5, (0.1, 0.0, -0.3), (0.7, -0.4), 9.0, 2)
    g0 = 0.1 - 0.3 * U**2
    g1 = 0.7 * U / 2
    g2 = -0.4 * (U**3 - 3 * U) / 24
    hand = norm.cdf(U) + norm.pdf(U) * (g0 / math.sqrt(50) + g1 / 9.0 + g2 / 81.0)
    assert np.max(np.abs(evaluate(e, U) - hand)) <= 1e-14


def test_round_trip_json():
    e = Expansion("J3", 40, 40**-0.5, (0.1, 0.0, 0.2), (0.3,), 6.0, 1, {"x": 1.0}, ("note",))
    assert Expansion.from_dict(e.to_dict()) == e


def test_tails_real_data():
    k = builtin_kernel("sin_sum")
    law = make_law("linear")
    for scheme in ("deterministic", "J1", "J3"):
        X = law.sample(np.random.default_rng(3), 60)
        d = build_deterministic(60, 3, 1.5) if scheme == "deterministic" else build_random(scheme, 60, 3, 1.5, 4)
        e = expansion_for_design(d, estimate_moments(X, k, d))
        assert evaluate(e, -10) < 0.01 and evaluate(e, 10) > 0.99


def test_general_matches_closed_form_when_balanced():
    k = builtin_kernel("sin_sum")
    o = law_oracle(make_law("linear"), k)
    ratios = []
    for n in (50, 100, 200):
        d = build_deterministic(n, 3, 1.5)
        g, c = edgeworth_general(d, o), edgeworth_deterministic(d, o)
        assert np.allclose(g.gamma0, c.gamma0, rtol=1e-10, atol=1e-13)
        ratios.append((g.gamma_ell[0] / g.M_alpha) / (c.gamma_ell[0] / c.M_alpha))
    assert np.allclose(ratios, 1.0, rtol=1e-10)


def test_general_on_complete_design_shape():
    # complete design: a_1 constant, so Gamma_0 coincides with the deterministic prototype shape
    k = builtin_kernel("sin_sum")
    o = law_oracle(make_law("linear"), k)
    d = complete_design(14, 3)
    g = edgeworth_general(d, o)
    g0, _ = gammas_deterministic(o, 3, 0.0, 1.0, 0)
    n, size = 14, d.size
    # exact finite-n weights: a_1 = C(n-1, r-1), a_2 = n-2 on every pair
    a1, a2 = math.comb(n - 1, 2), n - 2
    S1, S2, S3 = n * a1, n * a1**2, n * a1**3
    Q = math.comb(n, 2) * a1 * a1 * a2
    xi3 = o.xi1_sq**1.5
    rn = math.sqrt(n)
    c0 = (S3 / (6 * S2**1.5) * rn * o.g1_cubed + Q / S2**1.5 * rn * o.g1g1g2) / xi3
    assert g.gamma0[0] == pytest.approx(c0, rel=1e-12)
    assert size == math.comb(14, 3)
    assert np.sign(g.gamma0[2]) == np.sign(g0[2])


def test_grid_pairs():
    pairs = grid_pairs(normal_expansion())
    assert pairs.shape == (41, 2) and pairs[0, 0] == -2.0 and pairs[-1, 0] == 2.0
