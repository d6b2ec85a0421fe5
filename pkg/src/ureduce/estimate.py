"""Reduced U-statistics, plug-in moment estimators and studentization.

Window estimators use circular indexing: anchor ``i`` and step ``d`` give the
arithmetic progression ``i, i+d, ..., i+(r-1)d`` reduced mod ``n``. Because
kernels are symmetric, every window any estimator needs is a forward window
``W(j, d)`` for some anchor ``j``, so one table of ``n * D`` kernel values
serves all of them (``D = floor(n**(alpha-1))``).

Every function accepts a dataset of shape ``(n, p)`` or a stack of datasets
``(B, n, p)``; stacked input returns arrays of shape ``(B,)``.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

from .design import Design, floor_power
from .errors import DegenerateWindow, NonpositiveVariance, SupportTooLarge
from .kernels import Kernel, as_dataset, eval_batch

__all__ = [
    "MomentEstimates",
    "StudentizedValue",
    "compute_UJ",
    "design_values",
    "window_steps",
    "estimate_mu_sq",
    "estimate_xi1_sq",
    "estimate_xik_sq",
    "estimate_g1_cubed",
    "estimate_g1g1g2",
    "estimate_sigma_h_sq",
    "estimate_nu_h_cubed",
    "estimate_moments",
    "studentize_nondegenerate",
    "studentize_degenerate",
    "oracle_projections",
    "OracleMoments",
]

# cap on floats materialised per kernel call (points array)
_CHUNK_FLOATS = 4_000_000


def _stack(data):
    """Return ``(X, batched)`` with ``X`` of shape ``(B, n, p)``."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 3:
        return arr, True
    return as_dataset(arr)[None], False


def _out(values, batched):
    values = np.asarray(values, dtype=float)
    return values if batched else float(values[0])


def _eval_index(kernel: Kernel, X: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Kernel values on index tuples ``idx`` (m, r) for every dataset in ``X``.

    Returns shape ``(B, m)``; evaluation is chunked over tuples to bound memory.
    """
    B, _, p = X.shape
    m, r = idx.shape
    step = max(1, _CHUNK_FLOATS // max(1, B * r * p))
    out = np.empty((B, m))
    for start in range(0, m, step):
        sl = idx[start : start + step]
        out[:, start : start + step] = eval_batch(kernel, X[:, sl, :])
    return out


# ---------------------------------------------------------------------------
# reduced U-statistic


def design_values(data, kernel: Kernel, design: Design) -> np.ndarray:
    """Kernel values ``h(X_I)`` for every design tuple, shape ``(|J|,)`` or ``(B, |J|)``."""
    X, batched = _stack(data)
    if X.shape[1] != design.n:
        raise ValueError(f"dataset has {X.shape[1]} points but design expects n={design.n}")
    if kernel.degree != design.r:
        raise ValueError(f"kernel degree {kernel.degree} differs from design r={design.r}")
    vals = _eval_index(kernel, X, design.tuples)
    return vals if batched else vals[0]


def compute_UJ(data, kernel: Kernel, design: Design):
    """``|J|^{-1} sum_{I in J} h(X_I)``; duplicated tuples count every time."""
    vals = design_values(data, kernel, design)
    return vals.mean(axis=-1) if vals.ndim == 2 else float(vals.mean())


# ---------------------------------------------------------------------------
# window estimators


def window_steps(n: int, r: int, alpha: float) -> np.ndarray:
    """Steps ``d = 1..D`` whose widest window ``{0, d, ..., (2r-1)d}`` has no
    repeated residue mod ``n``.

    Raises ``DegenerateWindow`` when no step survives.
    """
    D = floor_power(n, alpha - 1)
    d = np.arange(1, max(D, 0) + 1)
    ok = np.ones(d.size, dtype=bool)
    for j in range(1, 2 * r):
        ok &= (j * d) % n != 0
    d = d[ok]
    if d.size == 0:
        raise DegenerateWindow(f"no admissible window step for n={n}, r={r}, alpha={alpha}")
    return d


def _forward_table(kernel, X, steps):
    """``H[b, j, s] = h(X_j, X_{j+d_s}, ..., X_{j+(r-1)d_s})`` (indices mod n)."""
    n, r = X.shape[1], kernel.degree
    j = np.arange(n)
    offs = np.arange(r)
    idx = (j[None, :, None] + steps[:, None, None] * offs[None, None, :]) % n  # (S, n, r)
    vals = _eval_index(kernel, X, idx.reshape(-1, r))
    return vals.reshape(X.shape[0], steps.size, n).transpose(0, 2, 1)


def _shifted(H, steps, mult):
    """``H[:, (i + mult*d) mod n, d]`` for every anchor ``i`` and step ``d``."""
    n = H.shape[1]
    rows = (np.arange(n)[:, None] + mult * steps[None, :]) % n
    cols = np.broadcast_to(np.arange(steps.size), rows.shape)
    return H[:, rows, cols]


# Relative window configurations. A window ``W(i + o, d_s)`` is stored as the
# label ``(o, s)``; its points relative to the anchor ``i`` are
# ``{o + a d_s mod n}``. Validity of a configuration is translation invariant,
# so one list of labels serves every anchor.

# configurations kept per anchor: 400 n^(alpha-1), so the n anchors cost O(n^alpha)
_CONFIG_SCALE = 400


def _config_cap(n, alpha):
    return max(64, int(math.ceil(_CONFIG_SCALE * n ** (alpha - 1.0))))

_ENUMERATE_MAX = 60_000


def _rel(o, d, r, n):
    return frozenset((o + a * d) % n for a in range(r))


def _containing(steps, r, n, point=0):
    """Labels of every table window containing ``point``, with their point sets."""
    out = []
    for s, d in enumerate(steps.tolist()):
        for j in range(r):
            o = (point - j * d) % n
            out.append(((o, s), _rel(o, d, r, n)))
    return out


def _subsample(configs, cap, rng):
    arr = np.array(configs, dtype=np.int64).reshape(len(configs), -1)
    if arr.shape[0] > cap:
        arr = arr[np.sort(rng.choice(arr.shape[0], cap, replace=False))]
    return arr


@functools.lru_cache(maxsize=64)
def _star_configs(n, r, steps_key, cap):
    """Unordered triples of windows containing the anchor and pairwise meeting only there."""
    steps = np.array(steps_key)
    W = _containing(steps, r, n)
    rng = np.random.default_rng(0)
    zero = frozenset([0])
    ok = lambda a, b, c: W[a][1] & W[b][1] == zero and W[a][1] & W[c][1] == zero and W[b][1] & W[c][1] == zero  # noqa: E731
    m = len(W)
    if math.comb(m, 3) <= _ENUMERATE_MAX:
        found = [W[a][0] + W[b][0] + W[c][0] for a, b, c in itertools.combinations(range(m), 3) if ok(a, b, c)]
    else:
        seen = set()
        for _ in range(50 * cap):
            a, b, c = sorted(rng.choice(m, 3, replace=False).tolist())
            if (a, b, c) not in seen and ok(a, b, c):
                seen.add((a, b, c))
                if len(seen) >= cap:
                    break
        found = [W[a][0] + W[b][0] + W[c][0] for a, b, c in sorted(seen)]
    return _subsample(found, cap, rng) if found else np.empty((0, 6), dtype=np.int64)


@functools.lru_cache(maxsize=64)
def _chain_configs(n, r, steps_key, cap):
    """``(A, B, C)`` with ``B`` anchored at 0, ``A & B = {i}``, ``B & C = {j}``, ``A & C`` empty."""
    steps = np.array(steps_key)
    rng = np.random.default_rng(0)
    cands = []
    for s, d in enumerate(steps.tolist()):
        Bset = _rel(0, d, r, n)
        for a, b in itertools.combinations(range(r), 2):
            pi, pj = (a * d) % n, (b * d) % n
            As = [(lab, st) for lab, st in _containing(steps, r, n, pi) if st & Bset == {pi}]
            Cs = [(lab, st) for lab, st in _containing(steps, r, n, pj) if st & Bset == {pj}]
            if As and Cs:
                cands.append(((0, s), As, Cs))
    total = sum(len(A) * len(C) for _, A, C in cands)
    found = []
    if total <= _ENUMERATE_MAX:
        for Blab, As, Cs in cands:
            found.extend(A[0] + Blab + C[0] for A in As for C in Cs if not (A[1] & C[1]))
    elif cands:
        seen = set()
        for _ in range(50 * cap):
            k = int(rng.integers(len(cands)))
            Blab, As, Cs = cands[k]
            A, C = As[int(rng.integers(len(As)))], Cs[int(rng.integers(len(Cs)))]
            key = A[0] + Blab + C[0]
            if key not in seen and not (A[1] & C[1]):
                seen.add(key)
                if len(seen) >= cap:
                    break
        found = sorted(seen)
    return _subsample(found, cap, rng) if found else np.empty((0, 6), dtype=np.int64)


def _config_mean(x, configs, n):
    """Mean over anchors and configurations of the product of ``x`` over the windows."""
    B = x.shape[0]
    i = np.arange(n)[:, None]
    step = max(1, _CHUNK_FLOATS // max(1, B * n))
    acc = np.zeros(B)
    for start in range(0, configs.shape[0], step):
        c = configs[start : start + step]
        prod = np.ones((B, n, c.shape[0]))
        for w in range(c.shape[1] // 2):
            prod *= x[:, (i + c[None, :, 2 * w]) % n, c[None, :, 2 * w + 1]]
        acc += prod.sum(axis=(1, 2))
    return acc / (n * configs.shape[0])


class _Windows:
    """Cache of the forward-window table and consecutive windows for one stack."""

    def __init__(self, kernel, X, alpha):
        n, r = X.shape[1], kernel.degree
        self.n, self.r = n, r
        self.cap = _config_cap(n, alpha)
        self.steps = window_steps(n, r, alpha)
        self.H = _forward_table(kernel, X, self.steps)
        self.kernel, self.X = kernel, X
        self._consec = None

    def mu_sq(self):
        return (self.H * _shifted(self.H, self.steps, self.r)).mean(axis=(1, 2))

    def overlap_mean(self, k):
        """Mean of ``h(A) h(B)`` with ``|A & B| = k`` (``B`` runs backwards from ``i+(k-1)d``)."""
        return (self.H * _shifted(self.H, self.steps, -(self.r - k))).mean(axis=(1, 2))

    def sq_mean(self):
        return (self.H**2).mean(axis=(1, 2))

    def consecutive(self):
        """``C[b, j] = h(X_j, ..., X_{j+r-1})``."""
        if self._consec is None:
            n, r = self.n, self.r
            if n < 3 * r - 2:
                raise DegenerateWindow(f"n={n} below 3r-2={3 * r - 2}")
            idx = (np.arange(n)[:, None] + np.arange(r)[None, :]) % n
            self._consec = _eval_index(self.kernel, self.X, idx)
        return self._consec

    def triple_star(self):
        """Mean over ``i`` of ``h(A) h(B) h(C)`` for three windows sharing only ``i``."""
        n, r = self.n, self.r
        if n < 3 * r - 2:
            raise DegenerateWindow(f"n={n} below 3r-2={3 * r - 2}")
        i = np.arange(n)[:, None]
        b = np.concatenate([[0], np.arange(r, 2 * r - 1)])
        c = np.concatenate([[0], np.arange(2 * r - 1, 3 * r - 2)])
        hb = _eval_index(self.kernel, self.X, (i + b[None, :]) % n)
        hc = _eval_index(self.kernel, self.X, (i + c[None, :]) % n)
        return (self.consecutive() * hb * hc).mean(axis=1)

    def chain(self):
        """Mean over ``i`` of ``h([i-r+1..i]) h([i..i+r-1]) h([i+r-1..i+2r-2])``."""
        C = self.consecutive()
        r = self.r
        return (np.roll(C, r - 1, axis=1) * C * np.roll(C, -(r - 1), axis=1)).mean(axis=1)

    def _centered(self, U_J):
        return self.H - np.asarray(U_J, dtype=float).reshape(-1, 1, 1)

    def centered_star(self, U_J):
        """Star-configuration mean of ``(h - U_J)`` products over the window table, or ``None``."""
        cfg = _star_configs(self.n, self.r, tuple(self.steps.tolist()), self.cap)
        return _config_mean(self._centered(U_J), cfg, self.n) if cfg.shape[0] else None

    def centered_chain(self, U_J):
        """Chain-configuration mean of ``(h - U_J)`` products over the window table, or ``None``."""
        cfg = _chain_configs(self.n, self.r, tuple(self.steps.tolist()), self.cap)
        return _config_mean(self._centered(U_J), cfg, self.n) if cfg.shape[0] else None


def estimate_mu_sq(data, kernel: Kernel, alpha: float):
    """``mu~^2``: mean product of two disjoint windows ``W(i, d)`` and ``W(i + r d, d)``."""
    X, batched = _stack(data)
    return _out(_Windows(kernel, X, alpha).mu_sq(), batched)


def _xi_sequence(w: _Windows, mu_sq):
    r = w.r
    xi = []
    for k in range(1, r + 1):
        val = w.overlap_mean(k) - mu_sq
        for kp in range(1, k):
            val = val - math.comb(k, kp) * xi[kp - 1]
        xi.append(val)
    return xi


def estimate_xi1_sq(data, kernel: Kernel, alpha: float):
    """``xi~_1^2``: forward/backward windows sharing only the anchor, minus ``mu~^2``."""
    X, batched = _stack(data)
    w = _Windows(kernel, X, alpha)
    return _out(w.overlap_mean(1) - w.mu_sq(), batched)


def estimate_xik_sq(data, kernel: Kernel, alpha: float, k: int):
    """``xi~_k^2`` for ``k`` in ``[1, r]`` (lower orders are computed on the way)."""
    X, batched = _stack(data)
    w = _Windows(kernel, X, alpha)
    if not 1 <= k <= w.r:
        raise ValueError(f"k must lie in [1, {w.r}]")
    return _out(_xi_sequence(w, w.mu_sq())[k - 1], batched)


def estimate_sigma_h_sq(data, kernel: Kernel, alpha_or_design):
    """``sigma~_h^2``.

    Given ``alpha``, the window form ``mean h(W)^2 - mu~^2`` (can be slightly
    negative). Given a ``Design``, the exact sample variance of the design's
    kernel values with divisor ``|J|``.
    """
    if isinstance(alpha_or_design, Design):
        vals = design_values(data, kernel, alpha_or_design)
        return _central(vals, 2)
    X, batched = _stack(data)
    w = _Windows(kernel, X, alpha_or_design)
    return _out(w.sq_mean() - w.mu_sq(), batched)


def _central(vals, power, center=None):
    if center is None:
        center = vals.mean(axis=-1)
    dev = vals - np.asarray(center)[..., None] if vals.ndim == 2 else vals - center
    res = (dev**power).mean(axis=-1)
    return res if vals.ndim == 2 else float(res)


def estimate_nu_h_cubed(data, kernel: Kernel, design: Design, U_J=None):
    """``nu~_h^3 = |J|^{-1} sum (h(X_I) - U_J)^3``."""
    vals = design_values(data, kernel, design)
    return _central(vals, 3, U_J)


def estimate_g1_cubed(data, kernel: Kernel, alpha: float, U_J, xi1_sq=None, method: str = "plain"):
    """``E~[g_1^3]``.

    ``plain``: three windows sharing only the anchor. The triple product has
    mean ``mu^3 + 3 mu xi_1^2 + E g_1^3``; both lower terms are removed, with
    ``mu^3`` estimated by ``mu~^2 * U_J`` and ``mu xi_1^2`` by
    ``U_J * xi~_1^2``.

    ``centered``: the mean of ``(h - U_J)`` products over every star
    configuration in the window table (at most 400 n^(alpha-1) per anchor). No extra
    kernel calls; far smaller variance, with a bias of order ``1/n``
    (to first order ``-3w(E g_1^3 + 2(r-1) E g_1g_1g_2)``, ``w = r/n``).
    """
    X, batched = _stack(data)
    w = _Windows(kernel, X, alpha)
    U_J = np.asarray(U_J, dtype=float)
    if method == "centered":
        val = w.centered_star(U_J)
        if val is not None:
            return _out(val, batched)
    elif method != "plain":
        raise ValueError(f"method must be 'plain' or 'centered', got {method!r}")
    mu_sq = w.mu_sq()
    if xi1_sq is None:
        xi1_sq = w.overlap_mean(1) - mu_sq
    return _out(w.triple_star() - mu_sq * U_J - 3.0 * U_J * np.asarray(xi1_sq), batched)


def estimate_g1g1g2(data, kernel: Kernel, U_J, xi1_sq, alpha: float, method: str = "plain"):
    """``E~[g_1 g_1 g_2]``.

    ``plain``: three chained consecutive windows, minus
    ``mu~^3 + 2 U_J xi~_1^2``. ``centered``: the mean of ``(h - U_J)``
    products over chain configurations of the window table (first-order bias
    ``-2w(E g_1^3 + 2(r-1) E g_1g_1g_2)``).
    """
    X, batched = _stack(data)
    w = _Windows(kernel, X, alpha)
    U_J = np.asarray(U_J, dtype=float)
    if method == "centered":
        val = w.centered_chain(U_J)
        if val is not None:
            return _out(val, batched)
    elif method != "plain":
        raise ValueError(f"method must be 'plain' or 'centered', got {method!r}")
    return _out(w.chain() - w.mu_sq() * U_J - 2.0 * U_J * np.asarray(xi1_sq), batched)


@dataclass
class MomentEstimates:
    """Plug-in moments for one dataset (or arrays over a stack of datasets).

    ``sigma_h_sq`` is the window form; ``sigma_h_sq_design`` and
    ``nu_h_cubed`` are exact central moments of the design's kernel values.
    """

    U_J: float
    mu_sq: float
    mu_for_odd: float
    xi1_sq: float
    xik_sq: list
    g1_cubed: float
    g1g1g2: float
    sigma_h_sq: float
    sigma_h_sq_design: float
    nu_h_cubed: float

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: np.asarray(v).tolist() for k, v in d.items()}

    def take(self, b: int) -> "MomentEstimates":
        """Scalar estimates of dataset ``b`` from a batched result."""
        pick = lambda v: float(np.asarray(v)[b])  # noqa: E731
        return MomentEstimates(
            pick(self.U_J), pick(self.mu_sq), pick(self.mu_for_odd), pick(self.xi1_sq),
            [pick(v) for v in self.xik_sq], pick(self.g1_cubed), pick(self.g1g1g2),
            pick(self.sigma_h_sq), pick(self.sigma_h_sq_design), pick(self.nu_h_cubed),
        )


def estimate_moments(data, kernel: Kernel, design: Design, alpha: float | None = None,
                     *, windows: bool = True, third: str = "centered") -> MomentEstimates:
    """Every plug-in moment in one pass.

    Kernel calls: ``|J|`` for the design and ``n * D`` for the window table,
    plus ``3n`` for the chained and star windows when ``third="plain"``.
    ``third="centered"`` (default) takes both third moments from centered
    window configurations (see ``estimate_g1_cubed``). ``windows=False``
    skips the window estimators (the degenerate pipeline needs only design
    moments); those fields are then ``nan``.
    """
    if third not in ("plain", "centered"):
        raise ValueError(f"third must be 'plain' or 'centered', got {third!r}")
    X, batched = _stack(data)
    alpha = design.alpha if alpha is None else alpha
    vals = design_values(X, kernel, design)
    U = vals.mean(axis=1)
    s2 = _central(vals, 2, U)
    nu3 = _central(vals, 3, U)
    B = X.shape[0]
    if windows:
        w = _Windows(kernel, X, alpha)
        mu_sq = w.mu_sq()
        xi = _xi_sequence(w, mu_sq)
        g3 = g112 = None
        if third == "centered":
            g3, g112 = w.centered_star(U), w.centered_chain(U)
        if g3 is None:
            g3 = w.triple_star() - mu_sq * U - 3.0 * U * xi[0]
        if g112 is None:
            g112 = w.chain() - mu_sq * U - 2.0 * U * xi[0]
        sig = w.sq_mean() - mu_sq
    else:
        nan = np.full(B, np.nan)
        mu_sq = g3 = g112 = sig = nan
        xi = [nan] * kernel.degree
    res = MomentEstimates(U, mu_sq, U, xi[0], list(xi[1:]), g3, g112, sig, s2, nu3)
    return res if batched else res.take(0)


# ---------------------------------------------------------------------------
# studentization


@dataclass(frozen=True)
class StudentizedValue:
    t: float
    numerator: float
    scale: float
    smoother: float
    kind: str

    def to_dict(self):
        return asdict(self)


def _check_positive(value, what):
    v = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise NonpositiveVariance(
            f"{what} = {value!r} is not positive; the kernel may be degenerate (try the k0 detector)")


def studentize_nondegenerate(U_J, mu0, a1_sum_sq, design_size, xi1_sq, smoother=0.0) -> StudentizedValue:
    """``T = (U_J - mu0) / (|J|^{-1} sqrt(sum a_1^2) xi~_1) + delta``."""
    _check_positive(xi1_sq, "xi1_sq")
    num = U_J - mu0
    scale = math.sqrt(a1_sum_sq) * math.sqrt(xi1_sq) / design_size
    return StudentizedValue(num / scale + smoother, num, scale, smoother, "nondegenerate")


def studentize_degenerate(U_J, mu0, design_size, sigma_h_sq, smoother=0.0) -> StudentizedValue:
    """``T = (U_J - mu0) / (|J|^{-1/2} sigma~_h) + delta``."""
    _check_positive(sigma_h_sq, "sigma_h_sq")
    num = U_J - mu0
    scale = math.sqrt(sigma_h_sq) / math.sqrt(design_size)
    return StudentizedValue(num / scale + smoother, num, scale, smoother, "degenerate")


# ---------------------------------------------------------------------------
# exact projections on a discrete law


@dataclass
class OracleMoments:
    mu: float
    xi_sq: list  # xi_1^2 .. xi_r^2
    g1_cubed: float
    g1g1g2: float
    sigma_h_sq: float
    third_central: float
    g: list  # g_1 .. g_r as tensors over the support
    masses: np.ndarray

    @property
    def xi1_sq(self):
        return self.xi_sq[0]

    @property
    def xik_sq(self):
        return self.xi_sq[1:]


def oracle_projections(support, masses, kernel: Kernel, cap: int = 10**7) -> OracleMoments:
    """Exact Hoeffding projections of ``kernel`` under a discrete law.

    ``g_k(x_1..x_k) = sum_{T subset [k]} (-1)^{k-|T|} h_{|T|}(x_T)`` with
    ``h_j`` the conditional mean given ``j`` arguments (``h_0 = mu``).
    """
    pts = as_dataset(support)
    w = np.asarray(masses, dtype=float)
    s, r = pts.shape[0], kernel.degree
    if w.shape != (s,) or np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-12):
        raise ValueError("masses must be nonnegative, one per support point, summing to 1")
    if s**r > cap:
        raise SupportTooLarge(f"support size {s} gives {s**r} > {cap} kernel evaluations")
    grid = np.array(list(itertools.product(range(s), repeat=r)), dtype=np.int64)
    Hten = eval_batch(kernel, pts[grid]).reshape((s,) * r)

    # conditional means h_j on the first j coordinates
    cond = [None] * (r + 1)
    cond[r] = Hten
    for j in range(r - 1, -1, -1):
        cond[j] = cond[j + 1] @ w
    mu = float(cond[0])

    def embed(T, subset, k):
        # broadcast a |subset|-dim tensor onto k axes
        shape = [1] * k
        for ax in subset:
            shape[ax] = s
        return np.asarray(T).reshape(shape) if subset else np.asarray(T).reshape([1] * k)

    g = []
    for k in range(1, r + 1):
        acc = np.zeros((s,) * k)
        for size in range(k + 1):
            for subset in itertools.combinations(range(k), size):
                acc = acc + (-1) ** (k - size) * embed(cond[size], subset, k)
        g.append(acc)

    def expect(T):
        for _ in range(T.ndim):
            T = T @ w
        return float(T)

    xi_sq = [expect(gk**2) for gk in g]
    g1 = g[0]
    g1_cubed = expect(g1**3)
    g1g1g2 = expect(g1[:, None] * g1[None, :] * g[1]) if r >= 2 else 0.0
    dev = Hten - mu
    return OracleMoments(mu, xi_sq, g1_cubed, g1g1g2, expect(dev**2), expect(dev**3), g, w)
