"""Edgeworth expansions for studentized reduced U-statistics.

Every expansion is stored in the prototype form

    G(u) = Phi(u) + phi(u) * { lead_scale * Gamma_0(u) + sum_l Gamma_l(u) / M**l },

with ``Gamma_0`` a polynomial in ``u`` and ``Gamma_l(u) = c_l * H_{2l-1}(u) / (2l)!``.
``lead_scale`` is ``n**-0.5`` except for the randomized degenerate case, where
it is ``|J|**-0.5``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy.stats import norm

from .design import Design, count_subsets, ell_max, floor_power
from .errors import EnumerationTooLarge, NonpositiveVariance

__all__ = [
    "Expansion",
    "hermite",
    "hermite_poly",
    "ell_max",
    "normal_expansion",
    "edgeworth_general",
    "general_raw_terms",
    "gammas_deterministic",
    "edgeworth_deterministic",
    "gammas_random",
    "edgeworth_random",
    "edgeworth_degenerate",
    "edgeworth_network",
    "expansion_for_design",
    "evaluate",
]

KINDS = ("general", "deterministic", "J1", "J3", "degenerate_random", "network", "normal")


def hermite(k: int, u):
    """Probabilists' Hermite polynomial ``H_k(u)`` by the three-term recurrence.

    >>> hermite(3, 2.0)
    2.0
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    u = np.asarray(u, dtype=float)
    h_prev, h = np.ones_like(u), u.copy()
    if k == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    for j in range(1, k):
        h_prev, h = h, u * h - j * h_prev
    return h if h.ndim else float(h)


def hermite_poly(k: int) -> Polynomial:
    """``H_k`` as a ``numpy.polynomial.Polynomial`` (same recurrence)."""
    x = Polynomial([0.0, 1.0])
    h_prev, h = Polynomial([1.0]), x
    if k == 0:
        return h_prev
    for j in range(1, k):
        h_prev, h = h, x * h - j * h_prev
    return h


@dataclass(frozen=True)
class Expansion:
    """Prototype Edgeworth expansion; see the module docstring.

    ``gamma0`` holds ascending polynomial coefficients of ``Gamma_0`` and
    ``gamma_ell[l-1]`` the constant ``c_l``.
    """

    kind: str
    n: int
    lead_scale: float
    gamma0: tuple
    gamma_ell: tuple
    M_alpha: float
    L: int
    raw_terms: dict = field(default_factory=dict, compare=False)
    notes: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown expansion kind {self.kind!r}")
        object.__setattr__(self, "gamma0", tuple(float(c) for c in self.gamma0))
        object.__setattr__(self, "gamma_ell", tuple(float(c) for c in self.gamma_ell))
        if len(self.gamma_ell) != self.L:
            raise ValueError(f"expected {self.L} Gamma_l constants, got {len(self.gamma_ell)}")

    def gamma0_poly(self) -> Polynomial:
        return Polynomial(self.gamma0 if self.gamma0 else (0.0,))

    def gamma_poly(self, ell: int) -> Polynomial:
        """``Gamma_l`` as a polynomial (``Gamma_0`` for ``ell = 0``)."""
        if ell == 0:
            return self.gamma0_poly()
        return self.gamma_ell[ell - 1] * hermite_poly(2 * ell - 1) / math.factorial(2 * ell)

    def correction(self, u):
        """``G(u) - Phi(u)``."""
        u = np.asarray(u, dtype=float)
        inner = self.lead_scale * self.gamma0_poly()(u)
        for ell in range(1, self.L + 1):
            inner = inner + self.gamma_poly(ell)(u) / self.M_alpha**ell
        return norm.pdf(u) * inner

    def __call__(self, u):
        return evaluate(self, u)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "lead_scale": self.lead_scale,
            "gamma0": list(self.gamma0),
            "gamma_ell": list(self.gamma_ell),
            "M_alpha": self.M_alpha,
            "L": self.L,
            "raw_terms": {k: (float(v) if np.ndim(v) == 0 else list(map(float, v)))
                          for k, v in self.raw_terms.items()},
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Expansion":
        return cls(d["kind"], d["n"], d["lead_scale"], tuple(d["gamma0"]), tuple(d["gamma_ell"]),
                   d["M_alpha"], d["L"], dict(d.get("raw_terms", {})), tuple(d.get("notes", ())))


def evaluate(expansion: Expansion, u):
    """``G(u)``; arrays evaluate elementwise."""
    u = np.asarray(u, dtype=float)
    out = norm.cdf(u)
    if expansion.kind != "normal":
        out = out + expansion.correction(u)
    return out if out.ndim else float(out)


def normal_expansion(n: int = 1) -> Expansion:
    return Expansion("normal", n, n**-0.5, (0.0,), (), 1.0, 0)


def _xi_cubed(xi1_sq):
    xi1_sq = float(xi1_sq)
    if not np.isfinite(xi1_sq) or xi1_sq <= 0:
        raise NonpositiveVariance(f"xi1_sq = {xi1_sq!r} is not positive")
    return xi1_sq**1.5


def _prototype_gamma0(g1_cubed, g1g1g2, xi3, w_const, w_sq):
    """``(2u^2+1)/6 E g1^3 + (r-1)/2 * (w_sq u^2 + w_const) E g1g1g2``, over ``xi^3``.

    Returned as ascending coefficients ``(c0, 0, c2)``.
    """
    c0 = (g1_cubed / 6.0 + w_const * g1g1g2) / xi3
    c2 = (g1_cubed / 3.0 + w_sq * g1g1g2) / xi3
    return (c0, 0.0, c2)


def _moment(m, name):
    return float(getattr(m, name))


def _xik(m):
    return [float(v) for v in m.xik_sq]


# ---------------------------------------------------------------------------
# general design


def _encode(rows: np.ndarray, n: int) -> np.ndarray:
    s = rows.shape[1]
    if s and float(n) ** s >= 2.0**62:
        raise EnumerationTooLarge(f"cannot encode {s}-subsets of {n} points in 64 bits")
    code = np.zeros(rows.shape[0], dtype=np.int64)
    for j in range(s):
        code = code * n + rows[:, j]
    return code


def _superset_weights(keys, weights, s, n):
    """``W(S) = sum_{I contains S} weights(I)`` for every ``s``-subset ``S``
    occurring in ``keys``; returns sorted codes and sums."""
    k = keys.shape[1]
    codes, vals = [], []
    for cols in itertools.combinations(range(k), s):
        codes.append(_encode(keys[:, cols], n))
        vals.append(weights)
    codes = np.concatenate(codes)
    vals = np.concatenate(vals)
    uniq, inv = np.unique(codes, return_inverse=True)
    return uniq, np.bincount(inv, weights=vals)


def _pair_disjoint_sum(ka, wa, kb, wb, n):
    """``sum_{I, I' disjoint} wa(I) wb(I')`` by inclusion-exclusion on shared subsets."""
    total = wa.sum() * wb.sum()
    for s in range(1, min(ka.shape[1], kb.shape[1]) + 1):
        ca, va = _superset_weights(ka, wa, s, n)
        cb, vb = _superset_weights(kb, wb, s, n)
        _, ia, ib = np.intersect1d(ca, cb, assume_unique=True, return_indices=True)
        total -= (-1) ** (s + 1) * float(np.dot(va[ia], vb[ib]))
    return total


def _disjoint_sum(blocks, ell, n, cap):
    """``sum`` over ordered ``ell``-tuples of mutually disjoint sets of the product of weights.

    ``blocks`` is a list of ``(keys, weights)``; sets of different sizes mix freely.
    """
    if ell == 1:
        return float(sum(w.sum() for _, w in blocks))
    if ell == 2:
        return float(sum(_pair_disjoint_sum(ka, wa, kb, wb, n) for ka, wa in blocks for kb, wb in blocks))
    m = sum(k.shape[0] for k, _ in blocks)
    if ell == 3 and m * m <= cap:
        inc = np.zeros((m, n))
        w = np.concatenate([wt for _, wt in blocks])
        row = 0
        for keys, _ in blocks:
            for j in range(keys.shape[1]):
                inc[np.arange(row, row + keys.shape[0]), keys[:, j]] = 1.0
            row += keys.shape[0]
        disjoint = (inc @ inc.T) == 0
        sw = np.sqrt(np.abs(w)) * np.sign(w)
        A = disjoint * np.sqrt(np.abs(w))[:, None] * sw[None, :]
        return float(np.trace(A @ A @ A))
    if float(m) ** ell > cap:
        raise EnumerationTooLarge(f"{m}^{ell} disjoint tuples exceed enumeration cap {cap}")
    sets = [frozenset(map(int, key)) for keys, _ in blocks for key in keys]
    w = np.concatenate([wt for _, wt in blocks])
    total = 0.0
    for combo in itertools.product(range(m), repeat=ell):
        used = set()
        ok = True
        for c in combo:
            if used & sets[c]:
                ok = False
                break
            used |= sets[c]
        if ok:
            total += float(np.prod(w[list(combo)]))
    return total


def general_raw_terms(design: Design, xik_sq, L: int, cap: int = 10**7) -> dict:
    """Exact subset-count sums of the general expansion.

    ``S1, S2, S3`` are sums of ``a_1``, ``a_1^2``, ``a_1^3``; ``Q`` is
    ``sum_{i<j} a_1(i) a_1(j) a_2({i,j})``; ``D_l`` is the ordered
    ``l``-fold disjoint sum of ``a_k^2 xi_k^2`` products over ``k >= 2``.
    """
    a1 = design.a1().astype(float)
    raw = {"S1": a1.sum(), "S2": (a1**2).sum(), "S3": (a1**3).sum(), "size": float(design.size)}
    blocks = []
    if design.r >= 2:
        c2 = count_subsets(design, 2)
        raw["Q"] = float((a1[c2.keys[:, 0]] * a1[c2.keys[:, 1]] * c2.counts).sum())
        if L >= 1:
            for k in range(2, design.r + 1):
                sc = c2 if k == 2 else count_subsets(design, k)
                blocks.append((sc.keys, sc.counts.astype(float) ** 2 * float(xik_sq[k - 2])))
    else:
        raw["Q"] = 0.0
    raw["D"] = [_disjoint_sum(blocks, ell, design.n, cap) for ell in range(1, L + 1)]
    return raw


def edgeworth_general(design: Design, moments, n: int | None = None, alpha=None,
                      cap: int = 10**7) -> Expansion:
    """Expansion for an arbitrary design from its exact subset counts.

    ``moments`` needs ``xi1_sq``, ``xik_sq``, ``g1_cubed`` and ``g1g1g2``
    (population oracle values or plug-in estimates).
    """
    n = design.n if n is None else n
    alpha = design.alpha if alpha is None else alpha
    L = ell_max(alpha)
    xi1_sq = _moment(moments, "xi1_sq")
    xi3 = _xi_cubed(xi1_sq)
    raw = general_raw_terms(design, _xik(moments), L, cap)
    S1, S2, S3, Q, J = raw["S1"], raw["S2"], raw["S3"], raw["Q"], raw["size"]
    g3, g112 = _moment(moments, "g1_cubed"), _moment(moments, "g1g1g2")
    rn = math.sqrt(n)
    # coefficients of (u^2 - 1) and u^2 for each third moment, then times sqrt(n)
    a_g3 = -S3 / (6.0 * S2**1.5) * rn
    b_g3 = S1 / (2.0 * math.sqrt(S2) * n) * rn
    a_g112 = -Q / S2**1.5 * rn
    b_g112 = (design.r - 1) * S1 / (math.sqrt(S2) * n) * rn
    c0 = (-a_g3 * g3 - a_g112 * g112) / xi3
    c2 = ((a_g3 + b_g3) * g3 + (a_g112 + b_g112) * g112) / xi3
    coefs = tuple(-D / (J**ell * xi1_sq**ell) for ell, D in enumerate(raw["D"], start=1))
    return Expansion("general", n, n**-0.5, (c0, 0.0, c2), coefs, S2 / J, L, raw)


# ---------------------------------------------------------------------------
# closed forms


def gammas_deterministic(moments, r: int, b1: float, b2: float, L: int):
    """``(gamma0 coefficients, (c_1..c_L))`` for the deterministic design.

    ``c_l = -{(sigma_h^2 - r xi_1^2) / ((b2 - b1) r^2 xi_1^2)}^l``.
    """
    xi1_sq = _moment(moments, "xi1_sq")
    xi3 = _xi_cubed(xi1_sq)
    g0 = _prototype_gamma0(_moment(moments, "g1_cubed"), _moment(moments, "g1g1g2"), xi3,
                           (r - 1) / 2.0, (r - 1) / 2.0)
    ratio = (_moment(moments, "sigma_h_sq") - r * xi1_sq) / ((b2 - b1) * r * r * xi1_sq)
    return g0, tuple(-(ratio**ell) for ell in range(1, L + 1))


def edgeworth_deterministic(design: Design, moments, *, span: float | None = None) -> Expansion:
    """Expansion for the deterministic design with ``M = floor(n**(alpha-1))``.

    ``span`` replaces ``b2 - b1``; by default it is the realized
    ``(number of steps) / M``, which makes the closed form agree exactly with
    the general expansion when every ``a_1(i)`` is equal.
    """
    n, r, alpha = design.n, design.r, design.alpha
    M = floor_power(n, alpha - 1)
    if span is None:
        steps = design.report.get("n_steps")
        span = steps / M if steps else (design.b2 - design.b1)
    L = ell_max(alpha)
    g0, coefs = gammas_deterministic(moments, r, 0.0, span, L)
    return Expansion("deterministic", n, n**-0.5, g0, coefs, float(M), L, {"span": span})


def gammas_random(scheme: str, moments, r: int, n: int, alpha: float):
    """``(gamma0 coefficients, (c_1..c_L), M_alpha, notes)`` for J1 or J3."""
    xi1_sq = _moment(moments, "xi1_sq")
    xi3 = _xi_cubed(xi1_sq)
    g3, g112 = _moment(moments, "g1_cubed"), _moment(moments, "g1g1g2")
    if scheme == "J1":
        g0 = _prototype_gamma0(g3, g112, xi3, (r - 1) / 2.0, (r - 1) / 2.0)
        weight = r * (r - 1)
    elif scheme == "J3":
        w = (r - 1) / (2.0 * r**3)
        g0 = _prototype_gamma0(g3, g112, xi3, w * (r**3 - 2 * r**2 + 2), w * (r**3 + 2 * r**2 - 2))
        weight = r * r * (r - 1) / 2.0
    else:
        raise ValueError(f"closed form available only for J1 and J3, not {scheme!r}")
    xik = _xik(moments)
    higher = sum(math.comb(r, k) * xik[k - 2] for k in range(2, r + 1))
    L = ell_max(alpha)
    ratio = higher / (r * r * xi1_sq)
    coefs = tuple(-(ratio**ell) for ell in range(1, L + 1))
    base = n ** (alpha - 1)
    notes = []
    factor = 1.0
    if r >= 2 and higher > 0:
        factor = 1.0 + n ** (alpha - 2) * xik[0] * weight / higher
    if not factor > 0:
        notes.append("nonpositive M correction factor from estimated xi_2^2; factor set to 1")
        factor = 1.0
    M = base * (1.0 + 1.0 / (r * base)) / factor
    return g0, coefs, M, tuple(notes)


def edgeworth_random(scheme: str, moments, r: int, n: int, alpha: float) -> Expansion:
    g0, coefs, M, notes = gammas_random(scheme, moments, r, n, alpha)
    return Expansion(scheme, n, n**-0.5, g0, coefs, M, ell_max(alpha), {}, notes)


def edgeworth_degenerate(nu3: float, sigma_h_sq: float, design_size: int, n: int | None = None) -> Expansion:
    """``Phi(u) + nu3 (2u^2+1) phi(u) / (6 sigma^3 |J|^{1/2})``."""
    if not np.isfinite(sigma_h_sq) or sigma_h_sq <= 0:
        raise NonpositiveVariance(f"sigma_h_sq = {sigma_h_sq!r} is not positive")
    if design_size < 1:
        raise ValueError("design_size must be >= 1")
    c = nu3 / (6.0 * sigma_h_sq**1.5)
    return Expansion("degenerate_random", n or design_size, design_size**-0.5, (c, 0.0, 2.0 * c), (), 1.0, 0)


def edgeworth_network(moments, n: int, r: int) -> Expansion:
    """Network expansion: the deterministic ``Gamma_0`` over ``sqrt(n)``, no ``Gamma_l``."""
    xi3 = _xi_cubed(_moment(moments, "xi1_sq"))
    g0 = _prototype_gamma0(_moment(moments, "g1_cubed"), _moment(moments, "g1g1g2"), xi3,
                           (r - 1) / 2.0, (r - 1) / 2.0)
    return Expansion("network", n, n**-0.5, g0, (), 1.0, 0)


GENERAL_CAP = 200_000


def expansion_for_design(design: Design, moments, general_cap: int = GENERAL_CAP) -> Expansion:
    """The expansion matching a design's scheme.

    Deterministic designs use the closed form unless wrap-around removed
    tuples (then ``a_1`` is uneven and the general form is exact). J1 and J3
    use their closed forms. Other schemes use the general form when
    ``|J| <= general_cap`` and otherwise the J1 closed form, flagged in
    ``notes``.
    """
    if design.scheme == "deterministic":
        if design.report.get("duplicates_removed", 0) == 0:
            return edgeworth_deterministic(design, moments)
        return edgeworth_general(design, moments)
    if design.scheme in ("J1", "J3"):
        return edgeworth_random(design.scheme, moments, design.r, design.n, design.alpha)
    if design.size <= general_cap:
        return edgeworth_general(design, moments)
    exp = edgeworth_random("J1", moments, design.r, design.n, design.alpha)
    return Expansion(exp.kind, exp.n, exp.lead_scale, exp.gamma0, exp.gamma_ell, exp.M_alpha, exp.L,
                     exp.raw_terms, exp.notes + (f"{design.scheme} approximated by the J1 closed form",))


def grid_pairs(expansion: Expansion, grid=None):
    """``(u, G(u))`` on the default plotting grid ``u = -2, -1.9, ..., 2``."""
    if grid is None:
        grid = np.round(np.arange(-20, 21) / 10.0, 10)
    return np.column_stack([grid, evaluate(expansion, grid)])

