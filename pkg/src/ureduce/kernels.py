"""Sample containers, the kernel abstraction and the built-in kernels.

A dataset is a float array of shape ``(n, p)``; scalar samples have ``p = 1``.
Kernels are evaluated in batches: ``kernel.func`` maps an array of shape
``(..., r, p)`` (any number of leading batch axes) to an array of shape
``(...)``. Every estimator in the package feeds kernels this way, so a kernel
written with numpy broadcasting is evaluated once per design instead of once
per tuple.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ArityMismatch, DimensionMismatch, UnknownKernel

__all__ = [
    "Kernel",
    "CountingKernel",
    "as_dataset",
    "eval_kernel",
    "eval_batch",
    "builtin_kernel",
    "check_symmetry",
    "BUILTIN_KERNELS",
]

SIN_SQ_ONE = np.sin(1.0) ** 2


@dataclass(frozen=True)
class Kernel:
    """A symmetric degree-``r`` kernel.

    Attributes
    ----------
    name : str
    degree : int
        Number of sample points ``r`` the kernel takes.
    func : callable
        Batched evaluator, ``(..., r, p) -> (...)``.
    params : mapping
        Construction parameters, echoed into reports.
    k0 : int or None
        Known degeneracy order (smallest ``k`` with nonzero ``xi_k``), if any.
    """

    name: str
    degree: int
    func: Callable[[np.ndarray], np.ndarray]
    params: Mapping = field(default_factory=dict)
    k0: int | None = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.func(points)


class CountingKernel(Kernel):
    """Kernel wrapper that counts how many tuples have been evaluated.

    >>> k = CountingKernel.wrap(builtin_kernel("sin_sum"))
    >>> _ = eval_batch(k, np.zeros((5, 3, 1)))
    >>> k.calls
    5
    """

    @classmethod
    def wrap(cls, kernel: Kernel) -> "CountingKernel":
        box = [0]
        inner = kernel.func

        def counted(points):
            points = np.asarray(points)
            box[0] += int(np.prod(points.shape[:-2], dtype=np.int64))
            return inner(points)

        obj = cls(kernel.name, kernel.degree, counted, kernel.params, kernel.k0)
        object.__setattr__(obj, "_box", box)
        return obj

    @property
    def calls(self) -> int:
        return self._box[0]

    def reset(self) -> None:
        self._box[0] = 0


def as_dataset(x) -> np.ndarray:
    """Coerce ``x`` to a float ``(n, p)`` array; 1-d input becomes ``(n, 1)``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"dataset must be (n, p) with n, p >= 1, got shape {arr.shape}")
    return arr


def eval_batch(kernel: Kernel, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.shape[-2] != kernel.degree:
        raise ArityMismatch(f"{kernel.name} takes {kernel.degree} points, got {points.shape[-2]}")
    return np.asarray(kernel.func(points), dtype=float)


def eval_kernel(kernel: Kernel, points: Sequence) -> float:
    """Evaluate ``kernel`` on a single tuple of sample points.

    Scalars are promoted to length-1 vectors. Raises ``ArityMismatch`` when the
    number of points differs from the degree and ``DimensionMismatch`` when the
    vectors have different lengths.
    """
    rows = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
    if len(rows) != kernel.degree:
        raise ArityMismatch(f"{kernel.name} takes {kernel.degree} points, got {len(rows)}")
    if len({row.shape for row in rows}) > 1:
        raise DimensionMismatch("sample points have differing vector lengths")
    return float(eval_batch(kernel, np.stack(rows)))


# ---------------------------------------------------------------------------
# built-in kernels


def _sign_symmetry(pts):
    x = pts[..., 0]
    a, b, c = x[..., 0], x[..., 1], x[..., 2]
    return np.sign(2 * a - b - c) + np.sign(2 * b - c - a) + np.sign(2 * c - a - b)


def _sin_sum(pts):
    return np.sin(pts.sum(axis=(-2, -1)))


def _degenerate_product(pts):
    return 27.0 * np.prod(np.sin(2.0 * pts[..., 0]) - SIN_SQ_ONE, axis=-1)


def _pairwise_dist(pts):
    diff = pts[..., :, None, :] - pts[..., None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


_PERM4 = list(itertools.permutations(range(4)))


def _split(pts, split):
    p = pts.shape[-1]
    s = p // 2 if split is None else split
    if not 0 < s < p:
        raise DimensionMismatch(f"paired kernel needs split in (0, {p}), got {s}")
    return pts[..., :s], pts[..., s:]


def _make_bergsma_dassios(split):
    def func(pts):
        x, y = _split(pts, split)
        dx, dy = _pairwise_dist(x), _pairwise_dist(y)
        total = 0.0
        for a, b, c, d in _PERM4:
            sx = np.sign(dx[..., a, b] + dx[..., c, d] - dx[..., a, c] - dx[..., b, d])
            sy = np.sign(dy[..., a, b] + dy[..., c, d] - dy[..., a, c] - dy[..., b, d])
            total = total + sx * sy
        return total / 24.0

    return func


def _make_dcov(split):
    def func(pts):
        x, y = _split(pts, split)
        a = _pairwise_dist(x)
        b = _pairwise_dist(y)
        total = 0.0
        for s, t, u, v in _PERM4:
            ast = a[..., s, t]
            total = total + ast * (b[..., u, v] + b[..., s, t] - b[..., s, u] - b[..., t, v])
        return total / 24.0

    return func


def _make_treatment_count(r, r_lo, r_hi):
    def func(pts):
        y = pts[..., 0]
        # ties in |Y| are broken by Y itself so the ordering is label-free
        order = np.lexsort((y, np.abs(y)), axis=-1)
        ranked = np.take_along_axis(y, order, axis=-1)
        return (ranked[..., r_lo - 1 : r_hi] > 0).sum(axis=-1).astype(float)

    return func


def builtin_kernel(name: str, **params) -> Kernel:
    """Return one of the built-in kernels.

    ``sign_symmetry`` (r=3), ``sin_sum`` (r=3), ``degenerate_product`` (r=3),
    ``bergsma_dassios`` and ``dcov`` (r=4; points are concatenated pairs
    ``x || y`` and ``split`` gives the length of ``x``, default half) and
    ``treatment_count`` (parameters ``r``, ``r_lo``, ``r_hi``).
    """
    if name == "sign_symmetry":
        return Kernel(name, 3, _sign_symmetry, {})
    if name == "sin_sum":
        return Kernel(name, 3, _sin_sum, {})
    if name == "degenerate_product":
        return Kernel(name, 3, _degenerate_product, {}, k0=3)
    if name == "bergsma_dassios":
        split = params.get("split")
        return Kernel(name, 4, _make_bergsma_dassios(split), {"split": split})
    if name == "dcov":
        split = params.get("split")
        return Kernel(name, 4, _make_dcov(split), {"split": split})
    if name == "treatment_count":
        r = int(params.get("r", 3))
        r_lo = int(params.get("r_lo", 1))
        r_hi = int(params.get("r_hi", r))
        if r < 2 or not 1 <= r_lo <= r_hi <= r:
            raise ValueError(f"treatment_count needs 1 <= r_lo <= r_hi <= r, r >= 2; got {r_lo}, {r_hi}, {r}")
        return Kernel(name, r, _make_treatment_count(r, r_lo, r_hi), {"r": r, "r_lo": r_lo, "r_hi": r_hi})
    raise UnknownKernel(name)


BUILTIN_KERNELS = (
    "sign_symmetry",
    "bergsma_dassios",
    "treatment_count",
    "sin_sum",
    "degenerate_product",
    "dcov",
)


def check_symmetry(kernel: Kernel, points: Sequence, trials: int = 100, rng_seed: int = 0) -> bool:
    """True iff the kernel agrees (to 1e-12) across ``trials`` random permutations."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows = np.stack([np.atleast_1d(np.asarray(p, dtype=float)) for p in points])
    base = eval_kernel(kernel, rows)
    rng = np.random.default_rng(rng_seed)
    perms = np.stack([rng.permutation(len(rows)) for _ in range(trials)])
    values = eval_batch(kernel, rows[perms])
    return bool(np.all(np.abs(values - base) <= 1e-12))
