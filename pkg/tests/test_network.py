import functools
import itertools
import math

import numpy as np
import pytest
from scipy.stats import kstest

from ureduce.design import Design, build_random, complete_design
from ureduce.errors import (GraphFormatError, InvalidProbability, MotifTooLarge, NonpositiveVariance,
                            RegimeMismatch, UncoveredNode, ZeroCount)
from ureduce.network import (BUILTIN_MOTIFS, Graph, GraphonSpec, MotifSpec, block_graphon, block_model_oracle,
                             builtin_motif, ci_network, ci_network_sparse, compute_UJ_network,
                             estimate_network_thirds, estimate_xi1_network, generate_graphon, motif_kernel,
                             motif_values, network_moments, node_averages, pvalue_network, rate_bound,
                             read_edge_list, read_motif, studentize_network, studentize_sparse, write_edge_list)

MOTIFS = sorted(BUILTIN_MOTIFS)
SKEWED = dict(p_within=0.6, p_between=0.2, shares=(0.3, 0.7))


def complete_graph(n):
    return Graph(n, np.ones((n, n), dtype=np.uint8) - np.eye(n, dtype=np.uint8))


def empty_graph(n):
    return Graph(n, np.zeros((n, n), dtype=np.uint8))


def random_graph(n, p, seed):
    return generate_graphon(n, GraphonSpec(lambda x, y: np.full_like(x, p), 1.0), np.random.default_rng(seed))


def naive_motif(A, I, motif):
    # permutation loop: count relabelings whose image edges are all present
    return sum(all(A[I[perm[a]], I[perm[b]]] for a, b in motif.edges)
               for perm in itertools.permutations(range(motif.r)))


def test_generate_extremes():
    one = GraphonSpec(lambda x, y: np.ones_like(x), 1.0)
    zero = GraphonSpec(lambda x, y: np.zeros_like(x), 1.0)
    assert generate_graphon(20, one, np.random.default_rng(0)).n_edges == math.comb(20, 2)
    assert generate_graphon(20, zero, np.random.default_rng(0)).n_edges == 0
    with pytest.raises(InvalidProbability):
        generate_graphon(10, GraphonSpec(lambda x, y: np.full_like(x, 0.9), 2.0))


def test_block_density():
    g = generate_graphon(500, block_graphon(0.6, 0.2), np.random.default_rng(4))
    m = math.comb(500, 2)
    assert abs(g.n_edges / m - 0.4) < 3 * math.sqrt(0.4 * 0.6 / m)


def test_generate_reproducible():
    spec = block_graphon(seed=9)
    assert np.array_equal(generate_graphon(40, spec).adjacency, generate_graphon(40, spec).adjacency)


def test_motif_kernel_examples():
    A = np.zeros((3, 3), dtype=np.uint8)
    A[0, 1] = A[1, 0] = A[1, 2] = A[2, 1] = 1
    path = Graph(3, A)
    assert motif_kernel(path, (0, 1, 2), builtin_motif("vshape")) == 2
    assert motif_kernel(complete_graph(3), (0, 1, 2), builtin_motif("triangle")) == 6
    g = random_graph(6, 0.5, 1)
    for i, j in itertools.combinations(range(6), 2):
        assert motif_kernel(g, (i, j), builtin_motif("edge")) == 2 * g.adjacency[i, j]


@pytest.mark.parametrize("name", MOTIFS)
def test_complete_graph_gives_r_factorial(name):
    m = builtin_motif(name)
    assert motif_kernel(complete_graph(m.r + 2), tuple(range(m.r)), m) == math.factorial(m.r)


@pytest.mark.parametrize("name", MOTIFS)
def test_against_naive_loop_and_relabeling(name):
    m = builtin_motif(name)
    g = random_graph(9, 0.5, 3)
    rng = np.random.default_rng(0)
    for _ in range(40):
        I = rng.choice(9, m.r, replace=False)
        v = motif_kernel(g, I, m)
        assert v == naive_motif(g.adjacency, I, m)
        assert motif_kernel(g, rng.permutation(I), m) == v


def test_motif_properties():
    out = builtin_motif("outtriangle")
    assert out.v == {3: 3, 4: 4} and out.cyclic
    assert not builtin_motif("threestar").cyclic
    for name in MOTIFS:
        m = builtin_motif(name)
        vals = [m.v[p] for p in sorted(m.v)]
        assert vals == sorted(vals)
        if m.r >= 3:
            assert m.v[m.r] == m.s
    with pytest.raises(MotifTooLarge):
        MotifSpec(9, ((0, 1),))
    with pytest.raises(KeyError):
        builtin_motif("pentagon")


def test_UJ_network_examples():
    tri = builtin_motif("triangle")
    d = build_random("J1", 12, 3, 2.0, rng_seed=1)
    assert compute_UJ_network(complete_graph(12), tri, d) == 6.0
    assert compute_UJ_network(empty_graph(12), tri, d) == 0.0
    g = random_graph(6, 0.5, 7)
    A = g.adjacency
    n_tri = sum(A[a, b] and A[b, c] and A[a, c] for a, b, c in itertools.combinations(range(6), 3))
    assert compute_UJ_network(g, tri, complete_design(6, 3)) == pytest.approx(6 * n_tri / 20, rel=1e-12)


@pytest.mark.parametrize("name", MOTIFS)
def test_complete_design_brute_force(name):
    m = builtin_motif(name)
    g = random_graph(9, 0.6, 11)
    brute = np.mean([naive_motif(g.adjacency, I, m) for I in itertools.combinations(range(9), m.r)])
    assert compute_UJ_network(g, m, complete_design(9, m.r)) == pytest.approx(brute, rel=1e-12)


def test_node_averages():
    tri = builtin_motif("triangle")
    d = build_random("J1", 15, 3, 2.0, rng_seed=2)
    assert np.all(node_averages(complete_graph(15), tri, d) == 6.0)
    assert np.all(node_averages(empty_graph(15), tri, d) == 0.0)
    single = Design(5, 3, 1.5, np.array([[0, 1, 2]]), "J1")
    with pytest.raises(UncoveredNode):
        node_averages(complete_graph(5), tri, single)
    single3 = Design(3, 3, 1.5, np.array([[0, 1, 2]]), "J1")
    assert node_averages(complete_graph(3), tri, single3).tolist() == [6.0, 6.0, 6.0]


@pytest.mark.parametrize("name", ["vshape", "triangle", "threestar"])
def test_double_counting_identity(name):
    m = builtin_motif(name)
    g = random_graph(30, 0.4, 5)
    d = build_random("J1", 30, m.r, 2.0, rng_seed=3)
    lhs = float((d.a1() * node_averages(g, m, d)).sum())
    assert lhs == pytest.approx(m.r * d.size * compute_UJ_network(g, m, d), rel=1e-12)


def test_network_moment_edge_cases():
    tri = builtin_motif("triangle")
    d = build_random("J1", 15, 3, 2.0, rng_seed=2)
    assert estimate_xi1_network(complete_graph(15), tri, d) == 0.0
    assert estimate_network_thirds(complete_graph(15), tri, d) == (0.0, 0.0)
    assert estimate_network_thirds(empty_graph(15), tri, d) == (0.0, 0.0)
    g = random_graph(25, 0.5, 1)
    assert estimate_xi1_network(g, tri, build_random("J1", 25, 3, 2.0, rng_seed=0)) >= 0


def test_studentize_examples():
    g = random_graph(20, 0.5, 2)
    tri = builtin_motif("triangle")
    d = build_random("J1", 20, 3, 2.0, rng_seed=1)
    m = network_moments(g, tri, d)
    assert studentize_network(g, tri, d, m.U_J, C_delta=0.0, regime="dense").t == 0.0
    assert studentize_network(g, tri, d, m.U_J, regime="sparse").t == 0.0
    assert studentize_sparse(0.01, 0.009, 10**4).t == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ZeroCount):
        studentize_sparse(0.0, 0.0, 100)
    with pytest.raises(NonpositiveVariance):
        studentize_network(complete_graph(20), tri, d, 6.0, regime="dense")


def test_rate_bound_examples():
    edge = builtin_motif("edge")
    tM, cM, advice = rate_bound(1.0, 100, 1.5, edge)
    logn = math.log(100)
    assert tM == pytest.approx(0.1 + logn**1.5 / 100 + math.sqrt(logn) / 100, rel=1e-12)
    assert advice == "dense_ok"
    n = 2560
    tri = builtin_motif("triangle")
    tM, cM, advice = rate_bound(n**-0.5, n, 2.0, tri)
    assert (n**-0.5) ** 3 * n < 1 < (n**-0.5) ** 3 * n**2
    assert cM < 1 and advice == "sparse_ok"


def test_ci_network_regimes():
    tri = builtin_motif("triangle")
    spec = block_graphon(1.0, 0.5, shares=(0.3, 0.7), rho=2560**-0.5)
    g = generate_graphon(2560, spec, np.random.default_rng(0))
    d = build_random("J1", 2560, 3, 2.0, rng_seed=0)
    with pytest.raises(RegimeMismatch):
        ci_network(g, tri, d, rho=spec.rho)
    rep = ci_network_sparse(g, tri, d, rho=spec.rho, mu0=0.0)
    assert rep.ci_low <= rep.estimate <= rep.ci_high and rep.extra["regime_advice"] == "sparse_ok"
    assert 0 <= rep.pvalue <= 1


def test_ci_network_dense():
    spec = block_graphon(**SKEWED)
    g = generate_graphon(100, spec, np.random.default_rng(1))
    m = builtin_motif("vshape")
    d = build_random("J1", 100, 3, 2.5, rng_seed=1)
    rep = ci_network(g, m, d, 0.05, seed=1, rho=1.0)
    assert rep.ci_low <= rep.ci_high and rep.extra["regime_advice"] == "dense_ok"
    assert 0 <= pvalue_network(g, m, d, rep.estimate, seed=1) <= 1


@pytest.mark.parametrize("name", MOTIFS)
def test_block_oracle_against_simulation(name):
    m = builtin_motif(name)
    spec = block_graphon(**SKEWED)
    o = block_model_oracle(spec, m)
    vals = []
    for b in range(200):
        g = generate_graphon(40, spec, np.random.default_rng([3, b]))
        vals.append(compute_UJ_network(g, m, complete_design(40, m.r)) if m.r <= 3 else
                    compute_UJ_network(g, m, build_random("J1", 40, m.r, 3.0, rng_seed=b)))
    vals = np.array(vals)
    assert abs(vals.mean() - o.mu) < 3 * vals.std(ddof=1) / math.sqrt(vals.size)


def test_balanced_blocks_degenerate():
    o = block_model_oracle(block_graphon(0.6, 0.2), builtin_motif("triangle"))
    assert abs(o.xi1_sq) < 1e-14
    assert block_model_oracle(block_graphon(**SKEWED), builtin_motif("triangle")).xi1_sq > 1e-3


@functools.lru_cache(maxsize=None)
def _vshape_moment_samples(n=200, reps=200):
    m = builtin_motif("vshape")
    spec = block_graphon(**SKEWED)
    out = []
    for b in range(reps):
        rng = np.random.default_rng([5, b])
        g = generate_graphon(n, spec, rng)
        mom = network_moments(g, m, build_random("J1", n, 3, 2.5, rng=rng))
        out.append((mom.xi1_sq, mom.g1_cubed, mom.g1g1g2))
    return block_model_oracle(spec, m), np.array(out)


def _edge_noise_bias(n):
    # node averages carry the binomial noise of the node's own edges; linearizing the
    # V-shape kernel in e_j = A_ij - p_ij gives Var = 16/(n-1) E[f(1-f)(q_X + q_Y)^2]
    w = np.array(SKEWED["shares"])
    P = np.array([[0.6, 0.2], [0.2, 0.6]])
    q = P @ w
    return 16.0 / (n - 1) * float(np.einsum("a,b,ab->", w, w, P * (1 - P) * (q[:, None] + q[None, :]) ** 2))


def _se(x):
    return x.std(ddof=1) / math.sqrt(x.size)


@pytest.mark.slow
def test_network_moments_against_block_oracle():
    o, est = _vshape_moment_samples()
    # E g1^3 carries no first-order edge noise
    assert abs(est[:, 1].mean() - o.g1_cubed) < 3 * _se(est[:, 1])
    # xi1: the noiseless oracle plus the O(1/n) edge-noise term
    target = o.xi1_sq + _edge_noise_bias(200)
    assert abs(est[:, 0].mean() - target) < 3 * _se(est[:, 0]) + 0.3 * _edge_noise_bias(200)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="no edge-noise correction: xi1 and g1g1g2 are biased by O(1/n), "
                                       "several SE at n=200")
def test_network_moments_equal_noiseless_oracle():
    o, est = _vshape_moment_samples()
    assert abs(est[:, 0].mean() - o.xi1_sq) < 3 * _se(est[:, 0])
    assert abs(est[:, 2].mean() - o.g1g1g2) < 3 * _se(est[:, 2])


@pytest.mark.slow
def test_dense_qq_normality():
    m = builtin_motif("triangle")
    spec = block_graphon(**SKEWED)
    mu = block_model_oracle(spec, m).mu
    ts = []
    for b in range(500):
        rng = np.random.default_rng([6, b])
        g = generate_graphon(100, spec, rng)
        d = build_random("J1", 100, 3, 2.5, rng=rng)
        ts.append(studentize_network(g, m, d, mu, seed=int(rng.integers(2**31))).t)
    assert kstest(ts, "norm").statistic < 0.08


def test_edge_list_io(tmp_path):
    g = random_graph(12, 0.4, 8)
    p = tmp_path / "g.txt"
    write_edge_list(g, p)
    assert np.array_equal(read_edge_list(p).adjacency, g.adjacency)
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2\n2 3\n2 1\n")
    with pytest.raises(GraphFormatError, match="line 3"):
        read_edge_list(bad)
    bad.write_text("1 2\n4 4\n")
    with pytest.raises(GraphFormatError, match="line 2"):
        read_edge_list(bad)
    bad.write_text("1 x\n")
    with pytest.raises(GraphFormatError, match="line 1"):
        read_edge_list(bad)


def test_motif_file(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("# r=4\n1 2\n2 3\n1 3\n1 4\n")
    m = read_motif(p)
    assert m.edges == builtin_motif("outtriangle").edges and m.r == 4
    p.write_text("1 2\n")
    with pytest.raises(GraphFormatError):
        read_motif(p)


def test_motif_values_batch_matches_single():
    m = builtin_motif("outtriangle")
    g = random_graph(10, 0.5, 4)
    t = np.array(list(itertools.combinations(range(10), 4))[:50])
    assert motif_values(g.adjacency, t, m).tolist() == [motif_kernel(g, row, m) for row in t]
