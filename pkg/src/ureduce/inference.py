"""Cornish-Fisher quantiles, confidence intervals, p-values and k0 detection."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm

from .design import Design
from .edgeworth import Expansion, edgeworth_degenerate, evaluate, expansion_for_design, hermite
from .errors import WrongScheme
from .estimate import (
    _Windows,
    _stack,
    _xi_sequence,
    estimate_moments,
    studentize_degenerate,
    studentize_nondegenerate,
)
from .kernels import Kernel

__all__ = [
    "CFQuantile",
    "InferenceReport",
    "DEFAULT_C_DELTA",
    "smoother_variance",
    "smoother_draw",
    "cf_terms",
    "cf_quantile",
    "ci_from_expansion",
    "pvalue_from_expansion",
    "ci_nondegenerate",
    "pvalue_nondegenerate",
    "ci_degenerate_random",
    "pvalue_degenerate_random",
    "detect_k0",
]

DEFAULT_C_DELTA = 0.008


def smoother_variance(n: int, alpha: float, C_delta: float = DEFAULT_C_DELTA, variant: str = "nondegenerate") -> float:
    """Variance of the artificial Gaussian smoother.

    ``C log(n) n^{-alpha/2}`` for the nondegenerate (and dense network) case,
    ``C log(n) n^{-alpha}`` for the randomized degenerate case.
    """
    if C_delta < 0:
        raise ValueError("C_delta must be nonnegative")
    if variant == "nondegenerate":
        return C_delta * math.log(n) * n ** (-alpha / 2)
    if variant == "degenerate":
        return C_delta * math.log(n) * n ** (-alpha)
    raise ValueError(f"unknown smoother variant {variant!r}")


def smoother_draw(n: int, alpha: float, C_delta: float = DEFAULT_C_DELTA, variant: str = "nondegenerate",
                  rng_seed=None, rng: np.random.Generator | None = None) -> float:
    """One draw of the smoother; equal seeds give equal draws."""
    if rng is None:
        rng = np.random.default_rng(rng_seed)
    return float(math.sqrt(smoother_variance(n, alpha, C_delta, variant)) * rng.standard_normal())


# ---------------------------------------------------------------------------
# Cornish-Fisher inversion


def _series_mul(a, b, order):
    out = np.zeros(order + 1)
    for i in range(order + 1):
        if a[i] == 0:
            continue
        out[i:] += a[i] * b[: order + 1 - i]
    return out


def cf_terms(expansion: Expansion, z: float) -> list:
    """``Psi_0 .. Psi_L`` at ``z``.

    ``Psi_0 = Gamma_0(z)``. The higher terms solve ``G(z + delta) = Phi(z)``
    order by order in ``t = 1/M`` with ``delta = sum_k Psi_k t^k``: expanding
    ``Phi(z + delta)`` and ``phi(z + delta) Gamma_l(z + delta)`` in ``delta``
    (derivatives of ``phi * p`` are ``phi * Dp`` with ``Dp = p' - u p``) and
    dividing by ``phi(z)``, the ``t^k`` coefficient is ``Psi_k`` plus terms in
    ``Psi_1 .. Psi_{k-1}``. In particular ``Psi_1 = -Gamma_1(z)``.
    """
    L = expansion.L
    psi = [float(expansion.gamma0_poly()(z))]
    if L == 0:
        return psi
    # derivative table: dg[l][m] = (D^m Gamma_l)(z)
    dg = [None]
    for ell in range(1, L + 1):
        p = expansion.gamma_poly(ell)
        row = []
        for _ in range(L + 1):
            row.append(float(p(z)))
            p = p.deriv() - p * np.polynomial.Polynomial([0.0, 1.0])
        dg.append(row)
    # Phi(z + delta) - Phi(z) = phi(z) sum_m (-1)^{m-1} H_{m-1}(z) delta^m / m!
    phi_coef = [0.0] + [(-1) ** (m - 1) * hermite(m - 1, z) / math.factorial(m) for m in range(1, L + 1)]
    delta = np.zeros(L + 1)
    for k in range(1, L + 1):
        delta[k] = 0.0
        total = np.zeros(L + 1)
        power = np.zeros(L + 1)
        power[0] = 1.0  # delta^0
        powers = [power]
        for m in range(1, L + 1):
            powers.append(_series_mul(powers[-1], delta, L))
        for m in range(1, L + 1):
            total += phi_coef[m] * powers[m]
        for ell in range(1, L + 1):
            inner = np.zeros(L + 1)
            for m in range(0, L + 1):
                inner += dg[ell][m] / math.factorial(m) * powers[m]
            shifted = np.zeros(L + 1)
            shifted[ell:] = inner[: L + 1 - ell]
            total += shifted
        delta[k] = -total[k]
    return psi + [float(v) for v in delta[1:]]


@dataclass(frozen=True)
class CFQuantile:
    beta: float
    z_beta: float
    psi: tuple
    value: float
    lead_scale: float
    M_alpha: float

    def reassemble(self) -> float:
        v = self.z_beta - self.lead_scale * self.psi[0]
        for ell, p in enumerate(self.psi[1:], start=1):
            v += p / self.M_alpha**ell
        return v


def cf_quantile(expansion: Expansion, beta: float) -> CFQuantile:
    """Expanded lower ``beta``-quantile ``z - lead * Psi_0 + sum Psi_l / M^l``."""
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    z = float(norm.ppf(beta))
    if expansion.kind == "normal":
        return CFQuantile(beta, z, (0.0,), z, expansion.lead_scale, expansion.M_alpha)
    psi = cf_terms(expansion, z)
    value = z - expansion.lead_scale * psi[0]
    for ell, p in enumerate(psi[1:], start=1):
        value += p / expansion.M_alpha**ell
    return CFQuantile(beta, z, tuple(psi), value, expansion.lead_scale, expansion.M_alpha)


# ---------------------------------------------------------------------------
# reports


@dataclass
class InferenceReport:
    estimate: float
    ci_low: float | None
    ci_high: float | None
    pvalue: float | None
    beta: float | None
    alpha: float
    scheme: str
    seed: int | None
    smoother_value: float
    runtime_seconds: float
    method: str
    t_stat: float | None = None
    scale: float | None = None
    mu0: float | None = None
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def ci_from_expansion(U, scale, expansion: Expansion, beta: float, delta: float):
    """Two-sided interval ``U - (q - delta) * scale`` at ``q = G^{-1}(1-beta/2), G^{-1}(beta/2)``.

    Returns ``(low, high, swapped)``; an expansion that inverts the quantile
    order is repaired by swapping, with a warning.
    """
    q_hi = cf_quantile(expansion, 1 - beta / 2).value
    q_lo = cf_quantile(expansion, beta / 2).value
    low, high = U - (q_hi - delta) * scale, U - (q_lo - delta) * scale
    swapped = low > high
    if swapped:
        warnings.warn("Cornish-Fisher quantiles inverted; interval endpoints swapped", RuntimeWarning)
        low, high = high, low
    return low, high, swapped


def pvalue_from_expansion(t_obs: float, expansion: Expansion) -> float:
    """``2 min(G(t), 1 - G(t))`` clipped to ``[0, 1]``."""
    g = evaluate(expansion, t_obs)
    return float(min(1.0, max(0.0, 2.0 * min(g, 1.0 - g))))


def _nondegenerate_core(data, kernel, design, C_delta, rng_seed):
    moments = estimate_moments(data, kernel, design)
    a1 = design.a1().astype(float)
    S2 = float((a1**2).sum())
    stud = studentize_nondegenerate(moments.U_J, moments.U_J, S2, design.size, moments.xi1_sq, 0.0)
    expansion = expansion_for_design(design, moments)
    delta = smoother_draw(design.n, design.alpha, C_delta, "nondegenerate", rng_seed)
    return moments, stud.scale, expansion, delta, S2


def ci_nondegenerate(data, kernel: Kernel, design: Design, beta: float = 0.1,
                     C_delta: float = DEFAULT_C_DELTA, rng_seed=None) -> InferenceReport:
    """Cornish-Fisher confidence interval for ``mu`` (two-sided, level ``1 - beta``)."""
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    t0 = time.perf_counter()
    moments, scale, expansion, delta, _ = _nondegenerate_core(data, kernel, design, C_delta, rng_seed)
    low, high, swapped = ci_from_expansion(moments.U_J, scale, expansion, beta, delta)
    notes = list(expansion.notes) + (["quantile order inverted; endpoints swapped"] if swapped else [])
    return InferenceReport(moments.U_J, low, high, None, beta, design.alpha, design.scheme, rng_seed, delta,
                           time.perf_counter() - t0, f"cornish_fisher/{expansion.kind}", None, scale, None,
                           notes, {"expansion": expansion.to_dict(), "moments": moments.to_dict()})


def pvalue_nondegenerate(data, kernel: Kernel, design: Design, mu0: float,
                         C_delta: float = DEFAULT_C_DELTA, rng_seed=None) -> InferenceReport:
    """Two-sided p-value for ``H0: mu = mu0`` from the empirical expansion."""
    t0 = time.perf_counter()
    moments, scale, expansion, delta, _ = _nondegenerate_core(data, kernel, design, C_delta, rng_seed)
    t_obs = (moments.U_J - mu0) / scale + delta
    p = pvalue_from_expansion(t_obs, expansion)
    return InferenceReport(moments.U_J, None, None, p, None, design.alpha, design.scheme, rng_seed, delta,
                           time.perf_counter() - t0, f"edgeworth/{expansion.kind}", t_obs, scale, mu0,
                           list(expansion.notes), {"expansion": expansion.to_dict(), "moments": moments.to_dict()})


def _degenerate_core(data, kernel, design, C_delta, rng_seed):
    if design.scheme not in ("J1", "J3"):
        raise WrongScheme(f"randomized degenerate inference needs a J1 or J3 design, got {design.scheme}; "
                          "deterministic designs use normal quantiles")
    moments = estimate_moments(data, kernel, design, windows=False)
    stud = studentize_degenerate(moments.U_J, moments.U_J, design.size, moments.sigma_h_sq_design)
    expansion = edgeworth_degenerate(moments.nu_h_cubed, moments.sigma_h_sq_design, design.size, design.n)
    delta = smoother_draw(design.n, design.alpha, C_delta, "degenerate", rng_seed)
    return moments, stud.scale, expansion, delta


def ci_degenerate_random(data, kernel: Kernel, design: Design, beta: float = 0.1,
                         C: float = DEFAULT_C_DELTA, rng_seed=None) -> InferenceReport:
    """Cornish-Fisher interval for a degenerate kernel under a J1 or J3 design."""
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    t0 = time.perf_counter()
    moments, scale, expansion, delta = _degenerate_core(data, kernel, design, C, rng_seed)
    low, high, _ = ci_from_expansion(moments.U_J, scale, expansion, beta, delta)
    return InferenceReport(moments.U_J, low, high, None, beta, design.alpha, design.scheme, rng_seed, delta,
                           time.perf_counter() - t0, "cornish_fisher/degenerate_random", None, scale, None,
                           [], {"expansion": expansion.to_dict(),
                                "sigma_h_sq": moments.sigma_h_sq_design, "nu_h_cubed": moments.nu_h_cubed})


def pvalue_degenerate_random(data, kernel: Kernel, design: Design, mu0: float,
                             C: float = DEFAULT_C_DELTA, rng_seed=None) -> InferenceReport:
    t0 = time.perf_counter()
    moments, scale, expansion, delta = _degenerate_core(data, kernel, design, C, rng_seed)
    t_obs = (moments.U_J - mu0) / scale + delta
    p = pvalue_from_expansion(t_obs, expansion)
    return InferenceReport(moments.U_J, None, None, p, None, design.alpha, design.scheme, rng_seed, delta,
                           time.perf_counter() - t0, "edgeworth/degenerate_random", t_obs, scale, mu0, [],
                           {"expansion": expansion.to_dict()})


def detect_k0(data, kernel: Kernel, alpha: float, c0: float = 0.25, return_estimates: bool = False):
    """Smallest ``k`` with ``sqrt(max(xi~_k^2, 0)) > n^{-c0}``; ``r + 1`` if none."""
    if not 0 < c0 < 0.5:
        raise ValueError("c0 must lie in (0, 1/2)")
    X, batched = _stack(data)
    if batched:
        raise ValueError("detect_k0 takes a single dataset")
    n = X.shape[1]
    w = _Windows(kernel, X, alpha)
    xi = [float(v[0]) for v in _xi_sequence(w, w.mu_sq())]
    threshold = n ** (-c0)
    k0 = next((k for k, v in enumerate(xi, start=1) if math.sqrt(max(v, 0.0)) > threshold), kernel.degree + 1)
    return (k0, xi, threshold) if return_estimates else k0
