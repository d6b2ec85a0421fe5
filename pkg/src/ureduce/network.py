"""Graphon networks, motif kernels and inference for reduced network moments.

Graphs are dense ``uint8`` adjacency matrices (symmetric, zero diagonal).
A motif kernel counts the relabelings of the motif that embed into the
induced subgraph, ``h(A_I) = sum_pi 1[A_{I_pi} >= R]``; it is evaluated by
grouping permutations with the same image edge set (each group has
``|Aut(R)|`` members), so only distinct embeddings are tested.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import norm

from .design import Design
from .edgeworth import Expansion, edgeworth_network
from .errors import (
    GraphFormatError,
    InvalidProbability,
    MotifTooLarge,
    NonpositiveVariance,
    RegimeMismatch,
    UncoveredNode,
    ZeroCount,
)
from .estimate import StudentizedValue, oracle_projections
from .inference import DEFAULT_C_DELTA, InferenceReport, ci_from_expansion, pvalue_from_expansion, smoother_draw
from .kernels import Kernel

__all__ = [
    "Graph",
    "MotifSpec",
    "GraphonSpec",
    "BUILTIN_MOTIFS",
    "builtin_motif",
    "block_graphon",
    "generate_graphon",
    "motif_kernel",
    "motif_values",
    "compute_UJ_network",
    "node_averages",
    "estimate_xi1_network",
    "estimate_network_thirds",
    "network_moments",
    "studentize_network",
    "studentize_sparse",
    "rate_bound",
    "ci_network",
    "ci_network_sparse",
    "block_model_oracle",
    "read_edge_list",
    "write_edge_list",
    "read_motif",
]

MAX_MOTIF_NODES = 8


@dataclass(frozen=True)
class Graph:
    n: int
    adjacency: np.ndarray

    def __post_init__(self):
        A = np.ascontiguousarray(self.adjacency, dtype=np.uint8)
        if A.shape != (self.n, self.n):
            raise GraphFormatError(f"adjacency must be {self.n}x{self.n}, got {A.shape}")
        if np.any(A > 1) or np.any(np.diagonal(A)) or not np.array_equal(A, A.T):
            raise GraphFormatError("adjacency must be symmetric 0/1 with zero diagonal")
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum() // 2)


@dataclass(frozen=True)
class MotifSpec:
    """A motif on nodes ``0..r-1`` given by its edge list."""

    r: int
    edges: tuple
    name: str = "custom"

    def __post_init__(self):
        if self.r > MAX_MOTIF_NODES:
            raise MotifTooLarge(f"motifs are limited to {MAX_MOTIF_NODES} nodes, got {self.r}")
        if self.r < 2:
            raise ValueError("a motif needs at least 2 nodes")
        norm_edges = tuple(sorted({tuple(sorted((int(a), int(b)))) for a, b in self.edges}))
        for a, b in norm_edges:
            if a == b or not (0 <= a < self.r and 0 <= b < self.r):
                raise GraphFormatError(f"invalid motif edge ({a + 1}, {b + 1})")
        object.__setattr__(self, "edges", norm_edges)

    @property
    def s(self) -> int:
        return len(self.edges)

    @property
    def cyclic(self) -> bool:
        parent = list(range(self.r))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self.edges:
            ra, rb = find(a), find(b)
            if ra == rb:
                return True
            parent[ra] = rb
        return False

    @property
    def v(self) -> dict:
        """``{p: max edges among p-node subsets}`` for ``p = 3..r``."""
        out = {}
        for p in range(3, self.r + 1):
            best = 0
            for nodes in itertools.combinations(range(self.r), p):
                ns = set(nodes)
                best = max(best, sum(1 for a, b in self.edges if a in ns and b in ns))
            out[p] = best
        return out

    def embeddings(self):
        """Distinct image edge sets over all relabelings, with multiplicities."""
        groups: dict = {}
        for perm in itertools.permutations(range(self.r)):
            img = frozenset(tuple(sorted((perm[a], perm[b]))) for a, b in self.edges)
            groups[img] = groups.get(img, 0) + 1
        return [(tuple(sorted(img)), mult) for img, mult in groups.items()]

    def to_dict(self):
        return {"name": self.name, "r": self.r, "s": self.s, "edges": [[a + 1, b + 1] for a, b in self.edges],
                "cyclic": self.cyclic, "v": {str(p): q for p, q in self.v.items()}}


BUILTIN_MOTIFS = {
    "edge": (2, [(0, 1)]),
    "vshape": (3, [(0, 1), (1, 2)]),
    "triangle": (3, [(0, 1), (1, 2), (0, 2)]),
    "threestar": (4, [(0, 1), (0, 2), (0, 3)]),
    "outtriangle": (4, [(0, 1), (1, 2), (0, 2), (0, 3)]),
}


def builtin_motif(name: str) -> MotifSpec:
    key = name.lower().replace("-", "").replace("_", "")
    if key not in BUILTIN_MOTIFS:
        raise KeyError(f"unknown motif {name!r}; choose from {sorted(BUILTIN_MOTIFS)}")
    r, edges = BUILTIN_MOTIFS[key]
    return MotifSpec(r, tuple(edges), key)


# ---------------------------------------------------------------------------
# graphon generation


@dataclass(frozen=True)
class GraphonSpec:
    f: Callable
    rho: float = 1.0
    seed: int | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)


def block_graphon(p_within: float = 0.6, p_between: float = 0.2, blocks: int = 2,
                  rho: float = 1.0, seed=None, shares=None) -> GraphonSpec:
    """Stochastic block graphon.

    ``shares`` are the block proportions (equal by default). Equal shares make
    every node's expected motif count identical, so ``xi_1 = 0`` and the
    network statistic is degenerate; use unequal shares for dense-regime
    inference.
    """
    K = int(blocks)
    w = np.full(K, 1.0 / K) if shares is None else np.asarray(shares, dtype=float)
    if w.shape != (K,) or np.any(w <= 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("shares must be K positive proportions summing to 1")
    edges = np.concatenate([[0.0], np.cumsum(w)[:-1]])
    P = np.full((K, K), float(p_between))
    np.fill_diagonal(P, float(p_within))

    def label(x):
        return np.searchsorted(edges, np.asarray(x), side="right") - 1

    def f(x, y):
        return P[label(x), label(y)]

    return GraphonSpec(f, rho, seed, "block",
                       {"p_within": float(p_within), "p_between": float(p_between), "blocks": K,
                        "shares": w, "matrix": P})


def generate_graphon(n: int, spec: GraphonSpec, rng: np.random.Generator | None = None,
                     return_latent: bool = False):
    """Latent ``X_i ~ U[0,1]``; ``A_ij ~ Bernoulli(rho f(X_i, X_j))`` for ``i < j``."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    x = rng.uniform(size=n)
    iu, ju = np.triu_indices(n, 1)
    p = spec.rho * np.asarray(spec.f(x[iu], x[ju]), dtype=float)
    if p.size and (p.max() > 1 or p.min() < 0):
        raise InvalidProbability(f"edge probabilities outside [0, 1] (max {p.max():.4g})")
    A = np.zeros((n, n), dtype=np.uint8)
    A[iu, ju] = rng.random(p.size) < p
    A = A | A.T
    g = Graph(n, A)
    return (g, x) if return_latent else g


# ---------------------------------------------------------------------------
# motif kernel


def motif_values(adjacency: np.ndarray, tuples: np.ndarray, motif: MotifSpec) -> np.ndarray:
    """``h(A_I)`` for every row ``I`` of ``tuples`` (shape ``(m, r)``)."""
    tuples = np.asarray(tuples)
    if tuples.ndim == 1:
        tuples = tuples[None]
    if tuples.shape[1] != motif.r:
        raise ValueError(f"tuples have {tuples.shape[1]} columns, motif has r={motif.r}")
    pairs = list(itertools.combinations(range(motif.r), 2))
    col = {pq: j for j, pq in enumerate(pairs)}
    P = np.stack([adjacency[tuples[:, a], tuples[:, b]] for a, b in pairs], axis=1).astype(bool)
    out = np.zeros(tuples.shape[0])
    for img, mult in motif.embeddings():
        hit = np.all(P[:, [col[e] for e in img]], axis=1)
        out += mult * hit
    return out


def motif_kernel(graph: Graph, I_r, motif: MotifSpec) -> int:
    """``h(A_{I_r})`` for one tuple of distinct nodes (0-based)."""
    idx = np.asarray(I_r, dtype=np.int64)
    if len(set(idx.tolist())) != idx.size:
        raise ValueError("motif kernel needs distinct nodes")
    return int(motif_values(graph.adjacency, idx[None], motif)[0])


def _design_values(graph, motif, design, chunk=2_000_000):
    if design.r != motif.r or design.n != graph.n:
        raise ValueError("design does not match graph size or motif order")
    t = design.tuples
    return np.concatenate([motif_values(graph.adjacency, t[s : s + chunk], motif)
                           for s in range(0, max(t.shape[0], 1), chunk)]) if t.shape[0] else np.zeros(0)


def compute_UJ_network(graph: Graph, motif: MotifSpec, design: Design) -> float:
    return float(_design_values(graph, motif, design).mean())


def _node_avgs(design, vals):
    a1 = design.a1()
    sums = np.bincount(design.tuples.ravel(), weights=np.repeat(vals, design.r), minlength=design.n)
    zero = np.flatnonzero(a1 == 0)
    if zero.size:
        raise UncoveredNode(int(zero[0]))
    return sums / a1, a1


def node_averages(graph: Graph, motif: MotifSpec, design: Design) -> np.ndarray:
    """``a^_i``: mean of ``h`` over design tuples containing node ``i``."""
    return _node_avgs(design, _design_values(graph, motif, design))[0]


@dataclass
class NetworkMoments:
    U_J: float
    xi1_sq: float
    g1_cubed: float
    g1g1g2: float
    second_moment: float  # |J|^{-1} sum h^2
    a1_sum_sq: float
    size: int
    xik_sq: list = field(default_factory=list)

    def to_dict(self):
        return {k: (float(v) if np.ndim(v) == 0 else list(v)) for k, v in self.__dict__.items()}


def _moments_from_values(design, vals):
    U = float(vals.mean())
    a_hat, a1 = _node_avgs(design, vals)
    J, r = design.size, design.r
    dev = a_hat - U
    xi1 = float((a1 * dev**2).sum() / (r * J))
    g3 = float((a1 * dev**3).sum() / (r * J))
    t = design.tuples
    g112 = float(((vals - U) * dev[t[:, 0]] * dev[t[:, 1]]).mean())
    return NetworkMoments(U, xi1, g3, g112, float((vals**2).mean()), float((a1.astype(float) ** 2).sum()), J)


def network_moments(graph: Graph, motif: MotifSpec, design: Design) -> NetworkMoments:
    return _moments_from_values(design, _design_values(graph, motif, design))


def estimate_xi1_network(graph: Graph, motif: MotifSpec, design: Design) -> float:
    """``r^{-1} |J|^{-1} sum_i a_1(i) (a^_i - U^_J)^2``."""
    return network_moments(graph, motif, design).xi1_sq


def estimate_network_thirds(graph: Graph, motif: MotifSpec, design: Design):
    """``(E^[g_1^3], E^[g_1 g_1 g_2])``."""
    m = network_moments(graph, motif, design)
    return m.g1_cubed, m.g1g1g2


def studentize_sparse(U, mu0, design_size, second_moment=None) -> StudentizedValue:
    """``(U - mu0) / sqrt(|J|^{-1} m2)`` with ``m2`` the mean squared kernel value.

    ``m2`` defaults to ``U``, the value for 0/1 kernels; motif kernels take
    values in ``{0, |Aut|, ...}``, so the pipelines pass the observed
    ``|J|^{-1} sum h^2`` instead.
    """
    m2 = U if second_moment is None else second_moment
    if not m2 > 0:
        raise ZeroCount("no motif occurrences among the sampled tuples")
    scale = math.sqrt(m2 / design_size)
    return StudentizedValue((U - mu0) / scale, U - mu0, scale, 0.0, "network_sparse")


def studentize_network(graph: Graph, motif: MotifSpec, design: Design, mu0: float,
                       C_delta: float = DEFAULT_C_DELTA, seed=None, regime: str = "dense",
                       moments: NetworkMoments | None = None) -> StudentizedValue:
    """Dense: ``(U - mu0) / (sqrt(sum a_1^2) xi^_1 / |J|) + delta``; sparse: see ``studentize_sparse``."""
    m = moments or network_moments(graph, motif, design)
    if regime == "sparse":
        return studentize_sparse(m.U_J, mu0, m.size, m.second_moment)
    if regime != "dense":
        raise ValueError(f"regime must be 'dense' or 'sparse', got {regime!r}")
    if not m.xi1_sq > 0:
        raise NonpositiveVariance(f"network xi1_sq = {m.xi1_sq!r} is not positive (node averages constant)")
    scale = math.sqrt(m.a1_sum_sq) * math.sqrt(m.xi1_sq) / m.size
    delta = smoother_draw(graph.n, design.alpha, C_delta, "nondegenerate", seed)
    return StudentizedValue((m.U_J - mu0) / scale + delta, m.U_J - mu0, scale, delta, "network_dense")


# ---------------------------------------------------------------------------
# rates and regimes


def rate_bound(rho: float, n: int, alpha: float, motif: MotifSpec, *, check: bool = False):
    """``(tilde_M, check_M, advice)`` for a motif at sparsity ``rho``.

    ``advice`` is ``dense_ok`` when ``rho^s n^{alpha-1} > 1`` and
    ``tilde_M < 1``, ``sparse_ok`` when ``rho^s n^{alpha-1} < 1 < rho^s n^alpha``
    and ``check_M < 1``, else ``neither``.
    """
    r, s = motif.r, motif.s
    logn = math.log(n)

    def bound(e):
        # e = alpha - 1 for tilde_M and alpha for check_M
        if r == 2:
            head = 1.0 / (rho * n**e)
        else:
            vp = motif.v
            mx = max((rho ** (-vp[p] / 2) * n ** (-(p - 1) / 2)
                      for p in range(3, math.ceil(alpha)) if p in vp), default=0.0)
            head = (rho ** (-s / 2) * n ** (-e / 2) + mx) * math.sqrt(logn)
        if motif.cyclic:
            tail = rho ** (-r / 2) / n * math.sqrt(logn)
        else:
            tail = math.sqrt(logn) / (rho * n)
        return head + logn**1.5 / n + tail

    tilde_M = bound(alpha - 1)
    check_M = bound(alpha)
    dense_signal = rho**s * n ** (alpha - 1)
    sparse_signal = rho**s * n**alpha
    if dense_signal > 1 and tilde_M < 1:
        advice = "dense_ok"
    elif dense_signal < 1 < sparse_signal and check_M < 1:
        advice = "sparse_ok"
    else:
        advice = "neither"
    return tilde_M, check_M, advice


# ---------------------------------------------------------------------------
# inference


def ci_network(graph: Graph, motif: MotifSpec, design: Design, beta: float = 0.05,
               C_delta: float = DEFAULT_C_DELTA, seed=None, rho: float | None = None,
               force: bool = False) -> InferenceReport:
    """Dense-regime Cornish-Fisher interval for the motif mean.

    ``rho`` (default: observed edge density) feeds ``rate_bound``; a sparse
    advice raises ``RegimeMismatch`` unless ``force``.
    """
    t0 = time.perf_counter()
    if rho is None:
        rho = max(graph.n_edges / math.comb(graph.n, 2), 1e-12)
    tilde_M, check_M, advice = rate_bound(rho, graph.n, design.alpha, motif)
    if advice == "sparse_ok" and not force:
        raise RegimeMismatch("rate bound advises the sparse regime; use the sparse interval")
    m = network_moments(graph, motif, design)
    stud = studentize_network(graph, motif, design, m.U_J, C_delta, seed, "dense", m)
    expansion = edgeworth_network(m, graph.n, motif.r)
    low, high, _ = ci_from_expansion(m.U_J, stud.scale, expansion, beta, stud.smoother)
    return InferenceReport(m.U_J, low, high, None, beta, design.alpha, design.scheme, seed, stud.smoother,
                           time.perf_counter() - t0, "cornish_fisher/network", None, stud.scale, None, [],
                           {"regime": "dense", "regime_advice": advice, "tilde_M": tilde_M, "check_M": check_M,
                            "rho": rho, "motif": motif.to_dict(), "moments": m.to_dict(),
                            "expansion": expansion.to_dict()})


def ci_network_sparse(graph: Graph, motif: MotifSpec, design: Design, beta: float = 0.05, seed=None,
                      rho: float | None = None, mu0: float | None = None) -> InferenceReport:
    """Normal-quantile interval (and optional p-value) from the sparse studentization."""
    t0 = time.perf_counter()
    if rho is None:
        rho = max(graph.n_edges / math.comb(graph.n, 2), 1e-12)
    tilde_M, check_M, advice = rate_bound(rho, graph.n, design.alpha, motif)
    m = network_moments(graph, motif, design)
    stud = studentize_sparse(m.U_J, m.U_J, m.size, m.second_moment)
    z = float(norm.ppf(1 - beta / 2))
    p = None
    t_obs = None
    if mu0 is not None:
        t_obs = (m.U_J - mu0) / stud.scale
        p = float(2 * norm.sf(abs(t_obs)))
    return InferenceReport(m.U_J, m.U_J - z * stud.scale, m.U_J + z * stud.scale, p, beta, design.alpha,
                           design.scheme, seed, 0.0, time.perf_counter() - t0, "normal/network_sparse", t_obs,
                           stud.scale, mu0, [],
                           {"regime": "sparse", "regime_advice": advice, "tilde_M": tilde_M, "check_M": check_M,
                            "rho": rho, "motif": motif.to_dict(), "moments": m.to_dict()})


def pvalue_network(graph: Graph, motif: MotifSpec, design: Design, mu0: float,
                   C_delta: float = DEFAULT_C_DELTA, seed=None) -> float:
    m = network_moments(graph, motif, design)
    stud = studentize_network(graph, motif, design, mu0, C_delta, seed, "dense", m)
    return pvalue_from_expansion(stud.t, edgeworth_network(m, graph.n, motif.r))


# ---------------------------------------------------------------------------
# block-model oracle


def block_model_oracle(spec: GraphonSpec, motif: MotifSpec):
    """Exact noiseless projections for a block graphon.

    Under a ``K``-block model the latent label has law ``shares`` on ``K`` values and
    ``E[h | labels] = rho^s sum_emb mult prod_edges P[z_a, z_b]``, so the
    discrete oracle applies directly.
    """
    P = np.asarray(spec.params["matrix"], dtype=float)
    K = P.shape[0]
    shares = np.asarray(spec.params["shares"], dtype=float)
    emb = motif.embeddings()
    rho_s = spec.rho**motif.s

    def func(pts):
        z = pts[..., 0].astype(int)
        out = np.zeros(z.shape[:-1])
        for img, mult in emb:
            term = np.full(z.shape[:-1], float(mult))
            for a, b in img:
                term = term * P[z[..., a], z[..., b]]
            out = out + term
        return rho_s * out

    kern = Kernel(f"block_{motif.name}", motif.r, func)
    return oracle_projections(np.arange(K, dtype=float), shares, kern)


# ---------------------------------------------------------------------------
# IO


def _parse_pairs(text, what):
    meta, pairs = {}, []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
            continue
        toks = line.split()
        if len(toks) != 2:
            raise GraphFormatError(f"{what} line {lineno}: expected two node ids, got {line!r}")
        try:
            a, b = int(toks[0]), int(toks[1])
        except ValueError:
            raise GraphFormatError(f"{what} line {lineno}: node ids must be integers") from None
        if a < 1 or b < 1:
            raise GraphFormatError(f"{what} line {lineno}: node ids are 1-based")
        if a == b:
            raise GraphFormatError(f"{what} line {lineno}: self-loop on node {a}")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise GraphFormatError(f"{what} line {lineno}: duplicate edge {key[0]} {key[1]}")
        seen.add(key)
        pairs.append(key)
    return meta, pairs


def read_edge_list(path, n: int | None = None) -> Graph:
    """Whitespace-separated 1-based undirected edge list; ``# n=...`` sets the node count."""
    with open(path, encoding="utf-8") as fh:
        meta, pairs = _parse_pairs(fh.read(), "edge list")
    if n is None:
        n = int(meta["n"]) if "n" in meta else max((b for _, b in pairs), default=0)
    A = np.zeros((n, n), dtype=np.uint8)
    for a, b in pairs:
        if b > n:
            raise GraphFormatError(f"node {b} exceeds n={n}")
        A[a - 1, b - 1] = A[b - 1, a - 1] = 1
    return Graph(n, A)


def write_edge_list(graph: Graph, path) -> None:
    iu, ju = np.nonzero(np.triu(graph.adjacency, 1))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={graph.n}\n")
        for a, b in zip(iu, ju):
            fh.write(f"{a + 1} {b + 1}\n")


def read_motif(path) -> MotifSpec:
    """Motif edge list; the header ``# r=...`` declares the node count."""
    with open(path, encoding="utf-8") as fh:
        meta, pairs = _parse_pairs(fh.read(), "motif")
    if "r" not in meta:
        raise GraphFormatError("motif file must declare '# r=<nodes>'")
    return MotifSpec(int(meta["r"]), tuple((a - 1, b - 1) for a, b in pairs), meta.get("name", "custom"))
