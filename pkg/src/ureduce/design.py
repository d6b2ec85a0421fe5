"""Index designs for reduced U-statistics and their subset counts.

A design is a multiset of increasing ``r``-tuples drawn from ``{0, ..., n-1}``
(stored zero-based; the text format and reports use one-based indices).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    BudgetExceedsUniverse,
    DegenerateWindow,
    DesignError,
    InvalidRatio,
    UniverseTooLarge,
)

__all__ = [
    "Design",
    "SubsetCounts",
    "floor_power",
    "build_deterministic",
    "build_random",
    "complete_design",
    "count_subsets",
    "verify_assumption2",
    "write_design",
    "read_design",
    "design_to_text",
    "design_from_text",
]

SCHEMES = ("deterministic", "J1", "J2", "J3", "J4", "complete")
COMPLETE_CAP = 10**7


def floor_power(n: int, exponent: float) -> int:
    """``floor(n**exponent)`` that survives floating error at exact powers.

    >>> floor_power(100, 1.5), floor_power(10, 1.5)
    (1000, 31)
    """
    x = float(n) ** float(exponent)
    f = math.floor(x)
    if x - f > 1 - 1e-9:
        f += 1
    return int(f)


@dataclass(frozen=True)
class Design:
    n: int
    r: int
    alpha: float
    tuples: np.ndarray
    scheme: str
    seed: int | None = None
    b1: float | None = None
    b2: float | None = None
    report: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.ascontiguousarray(self.tuples, dtype=np.int64)
        t.setflags(write=False)
        object.__setattr__(self, "tuples", t)

    @property
    def size(self) -> int:
        return int(self.tuples.shape[0])

    def __len__(self):
        return self.size

    def a1(self) -> np.ndarray:
        """Dense ``a_1(i)``: how many tuples contain node ``i``."""
        return np.bincount(self.tuples.ravel(), minlength=self.n)


@dataclass(frozen=True)
class SubsetCounts:
    """Nonzero ``a_k(I_k)`` counts of one design.

    ``keys`` holds the distinct ``k``-subsets (zero-based, sorted rows) and
    ``counts`` how many design tuples contain each.
    """

    k: int
    keys: np.ndarray
    counts: np.ndarray
    a1_dense: np.ndarray | None
    sum_sq: int
    total: int

    def as_dict(self) -> dict:
        return {tuple(int(v) for v in key): int(c) for key, c in zip(self.keys, self.counts)}


def _check_alpha(r, alpha):
    if not 1 < alpha <= r:
        raise DesignError(f"alpha must lie in (1, r={r}], got {alpha}")


def _dedupe_rows(rows: np.ndarray) -> np.ndarray:
    _, first = np.unique(rows, axis=0, return_index=True)
    return rows[np.sort(first)]


def build_deterministic(n: int, r: int, alpha: float, b1: float | None = None, b2: float | None = None,
                        *, strict: bool = False) -> Design:
    """The deterministic "no-waste" design.

    Tuples are ``{i + (2**(k-1) - 1) * d mod n : k = 1..r}`` for every anchor
    ``i`` and every step ``d`` between ``ceil(b1*M)`` and ``floor(b2*M)``, with
    ``M = floor(n**(alpha-1))``. Tuples produced twice by wrap-around are kept
    once.

    Parameters
    ----------
    b1, b2 : float, optional
        Step window; defaults ``(1 - 2**-r, 1)``. The ratio ``b1/b2`` must lie
        in ``((2**(r-1) - 1) / 2**(r-1), 1)``.
    strict : bool
        Additionally require ``n >= 4 * 2**(r-1) * b2 * M``, the conservative
        no-collision bound. Without it the builder only rejects steps whose
        tuple would repeat an index.
    """
    _check_alpha(r, alpha)
    if r < 2:
        raise DesignError("r must be >= 2")
    if b1 is None:
        b1 = 1.0 - 2.0 ** (-r)
    if b2 is None:
        b2 = 1.0
    lo_ratio = (2 ** (r - 1) - 1) / 2 ** (r - 1)
    if not (b1 > 0 and b2 > 0 and lo_ratio < b1 / b2 < 1):
        raise InvalidRatio(f"b1/b2 = {b1 / b2 if b2 else float('nan')} outside ({lo_ratio}, 1)")
    M = floor_power(n, alpha - 1)
    d_lo, d_hi = math.ceil(b1 * M - 1e-12), math.floor(b2 * M + 1e-12)
    if d_lo > d_hi or d_hi < 1:
        raise DegenerateWindow(f"empty step window [{d_lo}, {d_hi}] for n={n}, alpha={alpha}")
    if strict and n < 4 * 2 ** (r - 1) * b2 * M:
        raise DegenerateWindow(f"n={n} below the strict bound {4 * 2 ** (r - 1) * b2 * M}")
    offsets = np.array([2 ** (k - 1) - 1 for k in range(1, r + 1)], dtype=np.int64)
    steps = np.arange(max(d_lo, 1), d_hi + 1, dtype=np.int64)
    for d in steps:
        if len(set((offsets * d % n).tolist())) < r:
            raise DegenerateWindow(f"step d={d} folds a tuple onto itself modulo n={n}")
    anchors = np.arange(n, dtype=np.int64)
    raw = (anchors[None, :, None] + offsets[None, None, :] * steps[:, None, None]) % n
    raw = np.sort(raw.reshape(-1, r), axis=1)
    tuples = _dedupe_rows(raw)
    report = {
        "M": M,
        "steps": [int(steps[0]), int(steps[-1])],
        "n_steps": int(steps.size),
        "generated": int(raw.shape[0]),
        "duplicates_removed": int(raw.shape[0] - tuples.shape[0]),
        "size_over_n_alpha": tuples.shape[0] / n**alpha,
    }
    return Design(n, r, float(alpha), tuples, "deterministic", None, float(b1), float(b2), report)


def _random_subsets(rng: np.random.Generator, n: int, r: int, m: int) -> np.ndarray:
    """``m`` uniform draws of sorted ``r``-subsets of ``range(n)``, with replacement."""
    if m == 0:
        return np.empty((0, r), dtype=np.int64)
    if n <= 64:
        return np.sort(np.argsort(rng.random((m, n)), axis=1)[:, :r], axis=1)
    out = np.empty((m, r), dtype=np.int64)
    todo = np.arange(m)
    while todo.size:
        draw = np.sort(rng.integers(0, n, size=(todo.size, r)), axis=1)
        ok = np.all(np.diff(draw, axis=1) > 0, axis=1)
        out[todo[ok]] = draw[ok]
        todo = todo[~ok]
    return out


def _random_subsets_containing(rng, n, r, anchors):
    """For each anchor, a uniform sorted ``r``-subset containing it."""
    m = anchors.size
    others = _random_subsets(rng, n - 1, r - 1, m)
    # map {0..n-2} onto {0..n-1} minus the anchor
    others = others + (others >= anchors[:, None])
    return np.sort(np.concatenate([anchors[:, None], others], axis=1), axis=1)


def build_random(scheme: str, n: int, r: int, alpha: float, rng_seed: int | None = None,
                 rng: np.random.Generator | None = None) -> Design:
    """Randomized designs.

    ``J1``: ``floor(n**alpha)`` uniform ``r``-subsets with replacement. ``J2``:
    the same number without replacement. ``J3``: for every anchor ``i``,
    ``floor(n**(alpha-1))`` uniform subsets containing ``i``, with
    replacement. ``J4``: as ``J3`` without replacement within each anchor.
    """
    _check_alpha(r, alpha)
    if rng is None:
        rng = np.random.default_rng(rng_seed)
    universe = math.comb(n, r)
    if scheme in ("J1", "J2"):
        m = floor_power(n, alpha)
        if m < 1:
            raise DesignError("budget floor(n**alpha) is zero")
        if scheme == "J1":
            tuples = _random_subsets(rng, n, r, m)
        else:
            if m > universe:
                raise BudgetExceedsUniverse(f"{m} distinct tuples requested from C({n},{r}) = {universe}")
            if universe <= 2_000_000:
                pool = np.array(list(itertools.combinations(range(n), r)), dtype=np.int64)
                tuples = pool[np.sort(rng.choice(universe, size=m, replace=False))]
                tuples = tuples[rng.permutation(m)]
            else:
                seen: dict = {}
                while len(seen) < m:
                    for row in map(tuple, _random_subsets(rng, n, r, m - len(seen))):
                        seen.setdefault(row, None)
                tuples = np.array(list(seen), dtype=np.int64)
    elif scheme in ("J3", "J4"):
        per = floor_power(n, alpha - 1)
        if per < 1:
            raise DesignError("per-anchor budget floor(n**(alpha-1)) is zero")
        if scheme == "J3":
            anchors = np.repeat(np.arange(n, dtype=np.int64), per)
            tuples = _random_subsets_containing(rng, n, r, anchors)
        else:
            if per > math.comb(n - 1, r - 1):
                raise BudgetExceedsUniverse(f"{per} distinct tuples per anchor exceed C({n - 1},{r - 1})")
            blocks = []
            for i in range(n):
                got = np.empty((0, r), dtype=np.int64)
                while got.shape[0] < per:
                    extra = _random_subsets_containing(rng, n, r, np.full(per - got.shape[0], i, dtype=np.int64))
                    got = _dedupe_rows(np.concatenate([got, extra]))
                blocks.append(got)
            tuples = np.concatenate(blocks)
    else:
        raise DesignError(f"unknown random scheme {scheme!r}")
    report = {"size_over_n_alpha": tuples.shape[0] / n**alpha}
    return Design(n, r, float(alpha), tuples, scheme, rng_seed, None, None, report)


def complete_design(n: int, r: int, cap: int = COMPLETE_CAP) -> Design:
    """All ``C(n, r)`` tuples in lexicographic order."""
    total = math.comb(n, r)
    if total > cap:
        raise UniverseTooLarge(f"C({n},{r}) = {total} exceeds cap {cap}")
    if total == 0:
        raise DesignError(f"no {r}-subsets of {n} points")
    tuples = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), r)),
                         dtype=np.int64, count=total * r).reshape(total, r)
    return Design(n, r, float(r), tuples, "complete")


def count_subsets(design: Design, k: int) -> SubsetCounts:
    """Exact ``a_k(I_k)`` for every ``k``-subset contained in some design tuple."""
    r = design.r
    if not 1 <= k <= r:
        raise ValueError(f"k must lie in [1, {r}], got {k}")
    t = design.tuples
    total = math.comb(r, k) * design.size
    if k == 1:
        dense = design.a1()
        nz = np.flatnonzero(dense)
        return SubsetCounts(1, nz[:, None], dense[nz], dense, int((dense.astype(np.int64) ** 2).sum()), total)
    cols = list(itertools.combinations(range(r), k))
    sub = np.concatenate([t[:, c] for c in cols]) if cols else np.empty((0, k), dtype=np.int64)
    keys, counts = np.unique(sub, axis=0, return_counts=True)
    return SubsetCounts(k, keys, counts, None, int((counts.astype(np.int64) ** 2).sum()), total)


def verify_assumption2(design: Design, C2: float = 0.1, C3: float = 10.0) -> dict:
    """Check the balance conditions on every ``a_k``.

    For ``k < alpha`` every ``k``-subset must have ``a_k`` in
    ``[C2, C3] * n**(alpha-k)``; for ``k == alpha`` at most ``C3 * log n``; for
    ``k > alpha`` at most ``C3``. The ratio of ``sum a_k**2`` to
    ``n**(alpha + max(alpha-k, 0))`` must fall in ``[C2**2, C3**2]``, the range
    implied by the pointwise bands.
    """
    n, r, alpha = design.n, design.r, design.alpha
    per_k = []
    ok_all = True
    for k in range(1, r + 1):
        sc = count_subsets(design, k)
        covered = sc.keys.shape[0]
        amax = int(sc.counts.max()) if covered else 0
        amin_nz = int(sc.counts.min()) if covered else 0
        amin_all = amin_nz if covered == math.comb(n, k) else 0
        if abs(k - alpha) < 1e-12:
            band = (0.0, C3 * math.log(n))
            ok = amax <= band[1]
        elif k < alpha:
            band = (C2 * n ** (alpha - k), C3 * n ** (alpha - k))
            ok = band[0] <= amin_all and amax <= band[1]
        else:
            band = (0.0, C3)
            ok = amax <= band[1]
        ratio = sc.sum_sq / n ** (alpha + max(alpha - k, 0.0))
        ok_sq = C2**2 <= ratio <= C3**2
        ok_all = ok_all and ok and ok_sq
        per_k.append({
            "k": k,
            "min_nonzero": amin_nz,
            "min_all": amin_all,
            "max": amax,
            "band": [band[0], band[1]],
            "sum_sq": sc.sum_sq,
            "sum_sq_ratio": ratio,
            "pass": bool(ok and ok_sq),
        })
    return {"n": n, "r": r, "alpha": alpha, "scheme": design.scheme, "C2": C2, "C3": C3,
            "per_k": per_k, "pass": bool(ok_all)}


# ---------------------------------------------------------------------------
# text format: "# key=value" header lines, then one tuple per line (1-based)


def design_to_text(design: Design) -> str:
    head = [
        f"# n={design.n}",
        f"# r={design.r}",
        f"# alpha={design.alpha!r}",
        f"# scheme={design.scheme}",
        f"# seed={'' if design.seed is None else design.seed}",
    ]
    if design.b1 is not None:
        head += [f"# b1={design.b1!r}", f"# b2={design.b2!r}"]
    body = "\n".join(" ".join(str(v + 1) for v in row) for row in design.tuples.tolist())
    return "\n".join(head) + "\n" + body + ("\n" if body else "")


def design_from_text(text: str) -> Design:
    meta = {}
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
            continue
        try:
            rows.append([int(tok) - 1 for tok in line.split()])
        except ValueError as exc:
            raise DesignError(f"line {lineno}: {exc}") from None
    try:
        n, r = int(meta["n"]), int(meta["r"])
        alpha = float(meta["alpha"])
        scheme = meta["scheme"]
    except KeyError as exc:
        raise DesignError(f"missing header field {exc}") from None
    seed = int(meta["seed"]) if meta.get("seed") else None
    b1 = float(meta["b1"]) if "b1" in meta else None
    b2 = float(meta["b2"]) if "b2" in meta else None
    tuples = np.array(rows, dtype=np.int64).reshape(-1, r)
    if tuples.size and (tuples.min() < 0 or tuples.max() >= n or np.any(np.diff(tuples, axis=1) <= 0)):
        raise DesignError("tuples must be strictly increasing indices in [1, n]")
    return Design(n, r, alpha, tuples, scheme, seed, b1, b2)


def write_design(design: Design, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(design_to_text(design))


def read_design(path) -> Design:
    with open(path, encoding="utf-8") as fh:
        return design_from_text(fh.read())


def ell_max(alpha) -> int:
    """Number of higher-order terms ``floor((alpha/2) / (alpha-1))``.

    Exact for ``Fraction`` input; floats are floored with a 1e-12 guard band.

    >>> ell_max(1.5), ell_max(1.2), ell_max(2), ell_max(Fraction(4, 3))
    (1, 3, 1, 2)
    """
    if isinstance(alpha, Fraction):
        return math.floor((alpha / 2) / (alpha - 1))
    x = (alpha / 2.0) / (alpha - 1.0)
    return int(math.floor(x + 1e-12))
