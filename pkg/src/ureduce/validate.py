"""Monte Carlo harness and brute-force oracles.

Every replication ``b`` draws from its own stream
``np.random.default_rng(SeedSequence([seed, b]))``: data first, then the
design (randomized schemes), then the smoother. Results therefore do not
depend on how replications are batched.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.stats import norm

from .design import Design, _random_subsets, build_deterministic, build_random, complete_design
from .edgeworth import edgeworth_degenerate, evaluate, expansion_for_design
from .errors import GridMismatch, NonpositiveVariance, TruthUnavailable, UniverseTooLarge
from .estimate import compute_UJ, estimate_moments, estimate_xi1_sq, oracle_projections
from .inference import DEFAULT_C_DELTA, ci_from_expansion, smoother_variance
from .kernels import Kernel, builtin_kernel, eval_batch

__all__ = [
    "DataLaw",
    "make_law",
    "law_oracle",
    "true_mean",
    "GridCDF",
    "DEFAULT_GRID",
    "sup_error",
    "ks_distance",
    "MCConfig",
    "MCResult",
    "studentized_samples",
    "mc_reference_cdf",
    "cdf_study",
    "coverage_experiment",
    "network_coverage",
    "network_sparse_samples",
    "brute_force_complete_U",
    "runtime_scaling",
    "rep_rng",
]

DEFAULT_GRID = np.round(np.arange(-20, 21) / 10.0, 10)
# stream key for a design shared by all replications
DESIGN_STREAM = 2**32 - 1


def rep_rng(seed, rep) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(rep)]))


# ---------------------------------------------------------------------------
# data laws


@dataclass(frozen=True)
class DataLaw:
    """A law for iid points in ``R^p`` with iid coordinates.

    ``name`` is one of ``uniform`` (on [-1, 1]), ``uniform01``, ``linear`` (density
    ``(x+1)/2`` on [-1, 1]), ``normal`` or ``discrete`` (``support`` and
    ``masses``).
    """

    name: str
    p: int = 1
    support: tuple = ()
    masses: tuple = ()

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        shape = (n, self.p)
        if self.name == "uniform":
            return rng.uniform(-1.0, 1.0, size=shape)
        if self.name == "uniform01":
            return rng.random(shape)
        if self.name == "linear":
            return 2.0 * np.sqrt(rng.random(shape)) - 1.0
        if self.name == "normal":
            return rng.standard_normal(shape)
        if self.name == "discrete":
            return np.asarray(self.support, dtype=float)[rng.choice(len(self.support), size=shape, p=self.masses)]
        raise ValueError(f"unknown law {self.name!r}")

    def quadrature(self, q: int):
        """Nodes and weights integrating one coordinate against the law."""
        if self.name == "discrete":
            return np.asarray(self.support, dtype=float), np.asarray(self.masses, dtype=float)
        if self.name == "normal":
            x, w = np.polynomial.hermite_e.hermegauss(q)
            return x, w / w.sum()
        x, w = np.polynomial.legendre.leggauss(q)
        if self.name == "uniform":
            return x, w / 2.0
        if self.name == "uniform01":
            return (x + 1.0) / 2.0, w / 2.0
        if self.name == "linear":
            return x, w * (x + 1.0) / 2.0
        raise ValueError(f"unknown law {self.name!r}")

    def to_dict(self):
        return {"name": self.name, "p": self.p, "support": list(self.support), "masses": list(self.masses)}


LAWS = ("uniform", "uniform01", "linear", "normal", "discrete")


def make_law(name: str, p: int = 1, support=None, masses=None) -> DataLaw:
    if name == "discrete":
        if support is None or masses is None:
            raise ValueError("discrete law needs support and masses")
        m = np.asarray(masses, dtype=float)
        if np.any(m < 0) or not math.isclose(m.sum(), 1.0, abs_tol=1e-12) or len(m) != len(support):
            raise ValueError("masses must be nonnegative, sum to 1 and match the support")
        return DataLaw("discrete", p, tuple(float(s) for s in support), tuple(m.tolist()))
    if name not in LAWS:
        raise ValueError(f"unknown law {name!r}; choose from {LAWS}")
    return DataLaw(name, p)


def law_oracle(law: DataLaw, kernel: Kernel, q: int | None = None):
    """Hoeffding moments of ``kernel`` under ``law`` (univariate points).

    Discrete laws are exact; continuous laws replace the law by its ``q``-point
    Gauss rule, which is exact to quadrature accuracy for smooth kernels.
    """
    if law.p != 1:
        raise ValueError("law_oracle handles univariate laws only")
    if q is None:
        q = {1: 64, 2: 48, 3: 32, 4: 16}.get(kernel.degree, 8)
    x, w = law.quadrature(q)
    return oracle_projections(x, w, kernel)


def true_mean(law: DataLaw, kernel: Kernel, beta: float = 0.1, *, mc_size: int = 1_000_000, seed: int = 0):
    """``(mu, standard error, method)``.

    Uses exact enumeration for discrete laws, tensor Gauss quadrature when two
    orders agree to 1e-10, and otherwise Monte Carlo over fresh ``r``-samples;
    raises ``TruthUnavailable`` if the Monte Carlo SE is not below ``0.05 beta``.
    """
    r = kernel.degree
    if law.name == "discrete" and len(law.support) ** (r * law.p) <= 10**7:
        x, w = law.quadrature(0)
        if law.p == 1:
            return oracle_projections(x, w, kernel).mu, 0.0, "exact"
    if law.p == 1:
        qs = [q for q in (48, 24, 16, 12, 8) if q**r <= 2_000_000][:2]
        if len(qs) == 2:
            vals = []
            for q in qs:
                x, w = law.quadrature(q)
                grid = np.stack(np.meshgrid(*([x] * r), indexing="ij"), axis=-1).reshape(-1, r, 1)
                wt = np.prod(np.stack(np.meshgrid(*([w] * r), indexing="ij"), axis=-1).reshape(-1, r), axis=1)
                vals.append(float(np.dot(wt, eval_batch(kernel, grid))))
            if abs(vals[0] - vals[1]) < 1e-10:
                return vals[0], 0.0, "quadrature"
    rng = np.random.default_rng(seed)
    total = s = s2 = 0.0
    chunk = 200_000
    while total < mc_size:
        m = min(chunk, mc_size - int(total))
        pts = law.sample(rng, m * r).reshape(m, r, law.p)
        h = eval_batch(kernel, pts)
        s += h.sum()
        s2 += (h**2).sum()
        total += m
    mu = s / total
    se = math.sqrt(max(s2 / total - mu * mu, 0.0) / total)
    if not se < 0.05 * beta:
        raise TruthUnavailable(f"Monte Carlo SE {se:.3g} not below {0.05 * beta:.3g}")
    return mu, se, "monte_carlo"


# ---------------------------------------------------------------------------
# CDFs on a grid


@dataclass
class GridCDF:
    grid: np.ndarray
    values: np.ndarray
    label: str = ""
    n_samples: int = 0
    failures: int = 0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape:
            raise GridMismatch("grid and values differ in length")

    @classmethod
    def from_samples(cls, samples, grid=None, label="", failures=0):
        grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=float)
        s = np.sort(np.asarray(samples, dtype=float))
        return cls(grid, np.searchsorted(s, grid, side="right") / max(s.size, 1), label, s.size, failures)

    @classmethod
    def from_function(cls, fn, grid=None, label=""):
        grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=float)
        return cls(grid, np.asarray(fn(grid), dtype=float), label)


def sup_error(cdf_a, cdf_b) -> float:
    """``max_u |a(u) - b(u)|`` over a common grid."""
    ga, va = (cdf_a.grid, cdf_a.values) if isinstance(cdf_a, GridCDF) else (None, np.asarray(cdf_a, float))
    gb, vb = (cdf_b.grid, cdf_b.values) if isinstance(cdf_b, GridCDF) else (None, np.asarray(cdf_b, float))
    if va.shape != vb.shape:
        raise GridMismatch(f"grids of length {va.size} and {vb.size}")
    if ga is not None and gb is not None and not np.allclose(ga, gb, rtol=0, atol=1e-12):
        raise GridMismatch("CDFs are tabulated on different grids")
    return float(np.max(np.abs(va - vb)))


def ks_distance(samples) -> float:
    """Kolmogorov-Smirnov distance of a sample to ``N(0, 1)``."""
    return float(stats.kstest(np.asarray(samples, dtype=float), "norm").statistic)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class MCConfig:
    """Simulation protocol for one ``(law, kernel, scheme, n, alpha)`` cell.

    ``case`` is ``nondegenerate`` or ``degenerate``. ``redraw_design``
    redraws randomized designs every replication.
    """

    law: str = "linear"
    kernel: str = "sin_sum"
    scheme: str = "deterministic"
    n: int = 40
    alpha: float = 1.5
    beta: float = 0.1
    n_mc: int = 100_000
    n_reps: int = 200
    seed: int = 0
    grid: list | None = None
    case: str = "nondegenerate"
    C_delta: float = DEFAULT_C_DELTA
    redraw_design: bool = True
    p: int = 1
    kernel_params: dict = field(default_factory=dict)
    law_params: dict = field(default_factory=dict)
    batch: int = 2000
    workers: int = 1

    def __post_init__(self):
        if self.n_mc < 1 or self.n_reps < 1:
            raise ValueError("n_mc and n_reps must be >= 1")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.grid is not None and not np.all(np.isfinite(self.grid)):
            raise ValueError("grid must be finite")
        if self.case not in ("nondegenerate", "degenerate"):
            raise ValueError("case must be 'nondegenerate' or 'degenerate'")

    @classmethod
    def from_dict(cls, d: dict) -> "MCConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def grid_array(self):
        return DEFAULT_GRID if self.grid is None else np.asarray(self.grid, dtype=float)

    def make_kernel(self) -> Kernel:
        return builtin_kernel(self.kernel, **self.kernel_params)

    def make_law(self) -> DataLaw:
        return make_law(self.law, p=self.p, **self.law_params)

    def make_design(self, rng=None) -> Design:
        r = self.make_kernel().degree
        if self.scheme == "deterministic":
            return build_deterministic(self.n, r, self.alpha)
        return build_random(self.scheme, self.n, r, self.alpha, rng_seed=self.seed, rng=rng)

    def to_dict(self):
        return asdict(self)


@dataclass
class MCResult:
    config: dict
    methods: dict = field(default_factory=dict)
    coverage_mean: float | None = None
    coverage_sd: float | None = None
    ci_length_mean: float | None = None
    ci_length_sd: float | None = None
    runtime_mean: float | None = None
    runtime_sd: float | None = None
    n_reps: int = 0
    failures: int = 0
    workers: int = 1
    truth: dict = field(default_factory=dict)
    grid_table: list | None = None
    raw: dict | None = None

    def to_dict(self):
        d = asdict(self)
        if d["raw"] is not None:
            d["raw"] = {k: np.asarray(v).tolist() for k, v in d["raw"].items()}
        return json.loads(json.dumps(d, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)))

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_grid_csv(self, path):
        if not self.grid_table:
            raise ValueError("no grid table recorded")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "F_ref", "G_edgeworth", "Phi"])
            w.writerows(self.grid_table)


def _mean_sd(x):
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return float("nan"), float("nan")
    return float(x.mean()), float(x.std(ddof=1)) if x.size > 1 else 0.0


# ---------------------------------------------------------------------------
# studentized samples


def _draw_reps(cfg: MCConfig, law, kernel, reps, fixed_design):
    """Data, per-replication design tuples and smoothers for a block of replications."""
    r = kernel.degree
    variant = "degenerate" if cfg.case == "degenerate" else "nondegenerate"
    sd = math.sqrt(smoother_variance(cfg.n, cfg.alpha, cfg.C_delta, variant))
    X = np.empty((len(reps), cfg.n, law.p))
    tuples = None if fixed_design is not None else []
    delta = np.empty(len(reps))
    for j, b in enumerate(reps):
        rng = rep_rng(cfg.seed, b)
        X[j] = law.sample(rng, cfg.n)
        if fixed_design is None:
            tuples.append(_rep_design(cfg, r, rng).tuples)
        delta[j] = rng.normal(0.0, sd) if sd > 0 else 0.0
    return X, tuples, delta


def _rep_design(cfg, r, rng):
    return build_random(cfg.scheme, cfg.n, r, cfg.alpha, rng=rng)


def _values(kernel, X, tuples, design):
    if design is not None:
        from .estimate import design_values

        return design_values(X, kernel, design), np.tile(design.a1(), (X.shape[0], 1))
    T = np.stack(tuples)
    B = X.shape[0]
    vals = eval_batch(kernel, X[np.arange(B)[:, None, None], T])
    a1 = np.stack([np.bincount(t.ravel(), minlength=X.shape[1]) for t in tuples])
    return vals, a1


def studentized_samples(cfg: MCConfig, mu: float, reps=None):
    """``(T, failures)``: the studentized statistic for replications ``reps``.

    Nondegenerate: ``(U_J - mu) / (sqrt(sum a_1^2) xi~_1 / |J|) + delta``;
    degenerate: ``(U_J - mu) / (sigma~_h / sqrt(|J|)) + delta``. Replications
    with a nonpositive variance estimate are dropped and counted.
    """
    kernel, law = cfg.make_kernel(), cfg.make_law()
    reps = range(cfg.n_mc) if reps is None else reps
    reps = list(reps)
    fixed = None
    if cfg.scheme == "deterministic" or not cfg.redraw_design:
        fixed = cfg.make_design(rep_rng(cfg.seed, DESIGN_STREAM) if cfg.scheme != "deterministic" else None)
    out, failures = [], 0
    for start in range(0, len(reps), cfg.batch):
        block = reps[start : start + cfg.batch]
        X, tuples, delta = _draw_reps(cfg, law, kernel, block, fixed)
        vals, a1 = _values(kernel, X, tuples, fixed)
        U = vals.mean(axis=1)
        m = vals.shape[1]
        if cfg.case == "nondegenerate":
            xi1 = np.atleast_1d(estimate_xi1_sq(X, kernel, cfg.alpha))
            ok = xi1 > 0
            scale = np.sqrt((a1.astype(float) ** 2).sum(axis=1)) * np.sqrt(np.where(ok, xi1, 1.0)) / m
        else:
            s2 = vals.var(axis=1)
            ok = s2 > 0
            scale = np.sqrt(np.where(ok, s2, 1.0) / m)
        failures += int((~ok).sum())
        out.append(((U - mu) / scale + delta)[ok])
    return np.concatenate(out) if out else np.empty(0), failures


def mc_reference_cdf(cfg: MCConfig, mu: float | None = None) -> GridCDF:
    """Empirical CDF of ``n_mc`` studentized replications on the grid."""
    if mu is None:
        mu = true_mean(cfg.make_law(), cfg.make_kernel(), cfg.beta)[0]
    samples, failures = studentized_samples(cfg, mu)
    if samples.size == 0:
        raise NonpositiveVariance(f"all {failures} replications had a nonpositive variance estimate")
    return GridCDF.from_samples(samples, cfg.grid_array(), "reference", failures)


# ---------------------------------------------------------------------------
# CDF study and coverage


def _rep_design_for(cfg, kernel, b, fixed):
    if fixed is not None:
        return fixed
    rng = rep_rng(cfg.seed, b)
    cfg.make_law().sample(rng, cfg.n)  # keep the stream aligned with _draw_reps
    return _rep_design(cfg, kernel.degree, rng)


def _rep_data(cfg, law, b):
    return law.sample(rep_rng(cfg.seed, b), cfg.n)


def cdf_study(cfg: MCConfig, mu: float | None = None, reference: GridCDF | None = None) -> MCResult:
    """Sup-errors of the empirical Edgeworth expansion and of ``Phi`` against the reference CDF.

    The reference uses replications ``0..n_mc-1``; the empirical expansions
    are fitted on ``n_reps`` further datasets (replications ``n_mc..``).
    """
    kernel, law = cfg.make_kernel(), cfg.make_law()
    truth = {}
    if mu is None:
        mu, se, how = true_mean(law, kernel, cfg.beta)
        truth = {"mu": mu, "se": se, "method": how}
    if reference is None:
        reference = mc_reference_cdf(cfg, mu)
    grid = reference.grid
    phi = GridCDF(grid, norm.cdf(grid), "normal")
    fixed = cfg.make_design(rep_rng(cfg.seed, DESIGN_STREAM)) if (cfg.scheme == "deterministic" or not cfg.redraw_design) else None
    errs_e, errs_n, times, failures = [], [], [], 0
    mean_g = np.zeros(grid.size)
    for b in range(cfg.n_mc, cfg.n_mc + cfg.n_reps):
        t0 = time.perf_counter()
        design = _rep_design_for(cfg, kernel, b, fixed)
        X = _rep_data(cfg, law, b)
        try:
            if cfg.case == "degenerate":
                mom = estimate_moments(X, kernel, design, windows=False)
                exp = edgeworth_degenerate(mom.nu_h_cubed, mom.sigma_h_sq_design, design.size, cfg.n)
            else:
                exp = expansion_for_design(design, estimate_moments(X, kernel, design))
        except NonpositiveVariance:
            failures += 1
            continue
        # a CDF approximation is projected onto [0, 1] before scoring
        G = GridCDF(grid, np.clip(evaluate(exp, grid), 0.0, 1.0), "edgeworth")
        times.append(time.perf_counter() - t0)
        mean_g += G.values
        errs_e.append(sup_error(G, reference))
        errs_n.append(sup_error(phi, reference))
    good = len(errs_e)
    mean_g = mean_g / max(good, 1)
    table = [[float(u), float(f), float(g), float(p)] for u, f, g, p in zip(grid, reference.values, mean_g, phi.values)]
    em, es = _mean_sd(errs_e)
    rt = _mean_sd(times)
    return MCResult(cfg.to_dict(),
                    {"edgeworth": {"sup_error_mean": em, "sup_error_sd": es},
                     "normal": {"sup_error_mean": sup_error(phi, reference), "sup_error_sd": 0.0}},
                    runtime_mean=rt[0], runtime_sd=rt[1], n_reps=good, failures=failures + reference.failures,
                    workers=cfg.workers, truth=truth, grid_table=table)


def _batched_ci(cfg, kernel, X, design, deltas):
    """Nondegenerate Cornish-Fisher intervals for a stack sharing one design."""
    mom = estimate_moments(X, kernel, design)
    S2 = float((design.a1().astype(float) ** 2).sum())
    out = []
    for j in range(X.shape[0]):
        mj = mom.take(j)
        if not mj.xi1_sq > 0:
            out.append(None)
            continue
        scale = math.sqrt(S2) * math.sqrt(mj.xi1_sq) / design.size
        exp = expansion_for_design(design, mj)
        low, high, _ = ci_from_expansion(mj.U_J, scale, exp, cfg.beta, deltas[j])
        out.append((low, high))
    return out


def _degenerate_ci(kernel, X, design, beta, delta):
    mom = estimate_moments(X, kernel, design, windows=False)
    if not mom.sigma_h_sq_design > 0:
        raise NonpositiveVariance("design kernel values are constant")
    exp = edgeworth_degenerate(mom.nu_h_cubed, mom.sigma_h_sq_design, design.size, design.n)
    low, high, _ = ci_from_expansion(mom.U_J, math.sqrt(mom.sigma_h_sq_design / design.size), exp, beta, delta)
    return low, high


def coverage_experiment(cfg: MCConfig, mu: float | None = None, keep_raw: bool = False) -> MCResult:
    """Fraction of ``n_reps`` Cornish-Fisher intervals containing the true mean."""
    kernel, law = cfg.make_kernel(), cfg.make_law()
    truth = {}
    if mu is None:
        mu, se, how = true_mean(law, kernel, cfg.beta)
        truth = {"mu": mu, "se": se, "method": how}
    else:
        truth = {"mu": mu, "se": 0.0, "method": "given"}
    fixed = None
    if cfg.scheme == "deterministic" or not cfg.redraw_design:
        fixed = cfg.make_design(rep_rng(cfg.seed, DESIGN_STREAM))
    hits, lengths, times, failures = [], [], [], 0
    reps = list(range(cfg.n_reps))
    for start in range(0, len(reps), cfg.batch):
        block = reps[start : start + cfg.batch]
        X, tuples, deltas = _draw_reps(cfg, law, kernel, block, fixed)
        if fixed is not None and cfg.case == "nondegenerate":
            t0 = time.perf_counter()
            cis = _batched_ci(cfg, kernel, X, fixed, deltas)
            per = (time.perf_counter() - t0) / len(block)
            times.extend([per] * len(block))
        else:
            cis = []
            for j, b in enumerate(block):
                design = fixed
                if design is None:
                    design = Design(cfg.n, kernel.degree, float(cfg.alpha), tuples[j], cfg.scheme, None)
                t0 = time.perf_counter()
                try:
                    if cfg.case == "degenerate":
                        low, high = _degenerate_ci(kernel, X[j], design, cfg.beta, deltas[j])
                    else:
                        cis_j = _batched_ci(cfg, kernel, X[j][None], design, deltas[j : j + 1])
                        low, high = cis_j[0] if cis_j[0] is not None else (None, None)
                except NonpositiveVariance:
                    low = high = None
                times.append(time.perf_counter() - t0)
                cis.append(None if low is None else (low, high))
        for ci in cis:
            if ci is None:
                failures += 1
                continue
            hits.append(ci[0] <= mu <= ci[1])
            lengths.append(ci[1] - ci[0])
    cm, cs = _mean_sd(hits)
    lm, ls = _mean_sd(lengths)
    rm, rs = _mean_sd(times)
    raw = {"covered": np.asarray(hits), "length": np.asarray(lengths)} if keep_raw else None
    return MCResult(cfg.to_dict(), {}, cm, cs, lm, ls, rm, rs, len(hits), failures, cfg.workers, truth, None, raw)


# ---------------------------------------------------------------------------
# networks


def network_coverage(motif, spec, n: int, alpha: float, beta: float = 0.05, n_reps: int = 3000,
                     seed: int = 0, scheme: str = "J1", C_delta: float = DEFAULT_C_DELTA) -> MCResult:
    """Dense-regime coverage of ``ci_network`` against the exact block-model mean."""
    from .network import block_model_oracle, ci_network, generate_graphon

    mu = block_model_oracle(spec, motif).mu
    hits, lengths, times, failures = [], [], [], 0
    for b in range(n_reps):
        rng = rep_rng(seed, b)
        t0 = time.perf_counter()
        g = generate_graphon(n, spec, rng=rng)
        d = build_random(scheme, n, motif.r, alpha, rng=rng)
        try:
            rep = ci_network(g, motif, d, beta, C_delta, seed=int(rng.integers(2**31)), rho=spec.rho, force=True)
        except NonpositiveVariance:
            failures += 1
            continue
        times.append(time.perf_counter() - t0)
        hits.append(rep.ci_low <= mu <= rep.ci_high)
        lengths.append(rep.ci_high - rep.ci_low)
    cm, cs = _mean_sd(hits)
    lm, ls = _mean_sd(lengths)
    rm, rs = _mean_sd(times)
    cfg = {"motif": motif.to_dict(), "graphon": {k: (v.tolist() if hasattr(v, "tolist") else v)
                                                 for k, v in spec.params.items()},
           "rho": spec.rho, "n": n, "alpha": alpha, "beta": beta, "n_reps": n_reps, "seed": seed, "scheme": scheme}
    return MCResult(cfg, {}, cm, cs, lm, ls, rm, rs, len(hits), failures, 1, {"mu": mu, "method": "exact"})


def _stream_values(adjacency, motif, n, m, rng, chunk=1_000_000):
    """``(sum h, sum h^2)`` over ``m`` uniform J1 tuples, drawn in chunks."""
    from .network import motif_values

    s = s2 = 0.0
    left = m
    while left > 0:
        k = min(chunk, left)
        t = _random_subsets(rng, n, motif.r, k)
        h = motif_values(adjacency, t, motif)
        s += h.sum()
        s2 += (h**2).sum()
        left -= k
    return s, s2


def network_sparse_samples(motif, spec, n: int, alpha: float, n_reps: int = 500, seed: int = 0):
    """``(T', failures, mu)``: sparse-regime studentized statistics under a J1 design.

    Kernel values are streamed so the design is never materialized.
    """
    from .design import floor_power
    from .network import block_model_oracle, generate_graphon

    mu = block_model_oracle(spec, motif).mu
    m = floor_power(n, alpha)
    out, failures = [], 0
    for b in range(n_reps):
        rng = rep_rng(seed, b)
        g = generate_graphon(n, spec, rng=rng)
        s, s2 = _stream_values(g.adjacency, motif, n, m, rng)
        if s2 <= 0:
            failures += 1
            continue
        U = s / m
        out.append((U - mu) / math.sqrt(s2 / m / m))
    return np.asarray(out), failures, mu


# ---------------------------------------------------------------------------
# oracles and scaling


def brute_force_complete_U(dataset, kernel: Kernel, cap: int = 10**7) -> float:
    """Complete U-statistic by enumerating every ``r``-subset."""
    X = np.asarray(dataset, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, r = X.shape[0], kernel.degree
    total_count = math.comb(n, r)
    if total_count > cap:
        raise UniverseTooLarge(f"C({n},{r}) = {total_count} exceeds cap {cap}")
    total = 0.0
    for idx in itertools.combinations(range(n), r):
        total += float(kernel.func(X[list(idx)][None])[0])
    return total / total_count


def runtime_scaling(kernel: Kernel, law: DataLaw, alpha: float, ns, seed: int = 0, repeats: int = 3):
    """``(slope, times)`` of the reduced pipeline's wall time against ``n`` on log-log axes.

    The pipeline is design construction, moment estimation and the
    Cornish-Fisher interval; each time is the minimum over ``repeats`` runs.
    """
    from .inference import ci_nondegenerate

    times = []
    for n in ns:
        X = law.sample(np.random.default_rng([seed, n]), n)
        best = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            d = build_deterministic(n, kernel.degree, alpha)
            ci_nondegenerate(X, kernel, d, rng_seed=seed)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    slope = float(np.polyfit(np.log(ns), np.log(times), 1)[0])
    return slope, times


def complete_U(dataset, kernel: Kernel) -> float:
    """``compute_UJ`` on the complete design."""
    X = np.asarray(dataset, dtype=float)
    n = X.shape[0]
    return compute_UJ(X, kernel, complete_design(n, kernel.degree))
