"""Fractional powers of L and Laplace-transform-type spectral multipliers."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .operator import SelfAdjointOperator

KERNEL_TOL = 1e-10
log = logging.getLogger(__name__)


class QuadratureMismatch(ArithmeticError):
    pass


def _kernel_fraction(op, F) -> float:
    k = op.project_kernel(F)
    nf = np.linalg.norm(F)
    return float(np.linalg.norm(k) / nf) if nf > 0 else 0.0


def fractional_multiplier(op: SelfAdjointOperator, s: float) -> np.ndarray:
    """λ^{s/2} on the positive spectrum, 0 on ker L."""
    lam = op.eigenvalues
    out = np.zeros_like(lam)
    pos = lam > 0
    out[pos] = lam[pos] ** (s / 2.0)
    return out


def fractional_integral_multiplier(op: SelfAdjointOperator, s: float, m_order: int, points_per_octave: int = 16,
                                   tail: float = 1e-12) -> np.ndarray:
    """Quadrature of Γ(m-s/2)^{-1} ∫ t^{-s/2} (tλ)^m e^{-tλ} dt/t per eigenvalue.

    The time window is [ε/λ_max, 10³/λ₁⁺] on a log-uniform grid. The lower
    factor ε is 10^{-3}, reduced when the power-law tail ε^κ/(κΓ(κ)),
    κ = m - s/2, would exceed ``tail``.
    """
    kappa = m_order - s / 2.0
    if not kappa > 0:
        raise ValueError("m_order must exceed s/2")
    lam = op.eigenvalues
    pos = lam > 0
    lmax, l1 = float(lam.max()), float(lam[pos].min())
    eps = min(1e-3, (tail * kappa * math.gamma(kappa)) ** (1.0 / kappa))
    lo, hi = eps / lmax, 1e3 / l1
    n = math.ceil(points_per_octave * math.log2(hi / lo)) + 1
    t = lo * 2.0 ** (np.arange(n) / points_per_octave)
    wts = np.full(n, math.log(2) / points_per_octave)
    wts[[0, -1]] *= 0.5
    out = np.zeros_like(lam)
    lp = lam[pos]
    # integrand in log form for stability
    x = t[:, None] * lp[None, :]
    with np.errstate(divide="ignore"):
        logv = -0.5 * s * np.log(t)[:, None] + m_order * np.log(x) - x
    out[pos] = (wts @ np.exp(logv)) / math.gamma(kappa)
    return out


def integral_route_error(op: SelfAdjointOperator, f, s: float, m_order: int | None = None) -> float:
    """Relative gap between the spectral λ^{s/2} route and the time-integral route."""
    m = m_order if m_order is not None else max(1, math.floor(s / 2) + 1)
    if not m > s / 2:
        raise ValueError("m_order must exceed s/2")
    direct = op.apply_multiplier(fractional_multiplier(op, s), f)
    alt = op.apply_multiplier(fractional_integral_multiplier(op, s, m), f)
    scale = np.linalg.norm(direct)
    return float(np.linalg.norm(alt - direct) / scale) if scale > 0 else 0.0


def fractional_power(op: SelfAdjointOperator, f, s: float, m_order: int | None = None, *, check: bool = True,
                     rtol: float = 1e-6) -> np.ndarray:
    """L^{s/2} f, computed spectrally and cross-checked against the integral route.

    For s < 0 the input must be orthogonal to ker L. The kernel component is
    always dropped, so s = 0 returns P⁺ f. A gap above 1e-4 between the two
    routes raises; a gap above ``rtol`` is logged.
    """
    F = np.asarray(f, dtype=np.float64)
    if s < 0 and _kernel_fraction(op, F) > KERNEL_TOL:
        raise ValueError("negative powers need f orthogonal to ker L")
    direct = op.apply_multiplier(fractional_multiplier(op, s), F)
    if check and s != 0:
        err = integral_route_error(op, F, s, m_order)
        if err > 1e-4:
            raise QuadratureMismatch(f"integral route disagrees by {err:.2e}")
        if err > rtol:
            log.warning("fractional power: integral route off by %.2e", err)
    return direct


# ---------------------------------------------------------------- multipliers


@dataclass(frozen=True, eq=False)
class MultiplierProfile:
    """Bounded symbol m on [0, ∞); ``breakpoints`` help the adaptive quadrature."""

    m: Callable[[float], float]
    bound: float
    descriptor: dict = field(default_factory=dict)
    breakpoints: tuple = ()

    def scaled(self, c: float) -> "MultiplierProfile":
        base = self.m
        return MultiplierProfile(lambda u: c * base(u), abs(c) * self.bound,
                                 {"type": "scaled", "c": c, "base": self.descriptor}, self.breakpoints)


def symbol_from_config(cfg: dict) -> MultiplierProfile:
    kind = cfg.get("type")
    if kind == "constant":
        v = float(cfg.get("value", 1.0))
        return MultiplierProfile(lambda u: v, abs(v), dict(cfg))
    if kind == "exp":
        a = float(cfg["a"])
        if a < 0:
            raise ValueError("exp symbol needs a >= 0 to stay bounded")
        return MultiplierProfile(lambda u: math.exp(-a * u), 1.0, dict(cfg))
    if kind == "table":
        u = np.asarray(cfg["u"], dtype=np.float64)
        m = np.asarray(cfg["m"], dtype=np.float64)
        if u.shape != m.shape or u.size == 0 or np.any(np.diff(u) <= 0) or np.any(u < 0):
            raise ValueError("table symbol needs increasing nonnegative u and matching m")
        return MultiplierProfile(lambda x: float(np.interp(x, u, m)), float(np.abs(m).max()), dict(cfg),
                                 tuple(float(v) for v in u))
    raise ValueError(f"unknown symbol type {kind!r}")


def laplace_scalar(mprof: MultiplierProfile, lam: float) -> float:
    """∫₀^∞ tλ e^{-t²λ} m(t²) dt = ½ ∫₀^∞ e^{-u} m(u/λ) du (λ > 0)."""
    if lam <= 0:
        return 0.0
    pts = sorted({b * lam for b in mprof.breakpoints if 0 < b * lam < 60})
    g = lambda u: math.exp(-u) * mprof.m(u / lam)  # noqa: E731
    if pts:
        edges = [0.0] + pts + [60.0]
        total = sum(integrate.quad(g, a, b, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
                    for a, b in zip(edges[:-1], edges[1:]))
        total += integrate.quad(g, 60.0, np.inf, epsabs=1e-15, limit=200)[0]
    else:
        total = integrate.quad(g, 0.0, np.inf, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    return 0.5 * total


def laplace_multiplier_values(op: SelfAdjointOperator, mprof: MultiplierProfile) -> np.ndarray:
    lam = op.eigenvalues
    cache: dict[float, float] = {}
    out = np.empty_like(lam)
    for i, l in enumerate(lam):
        key = float(l)
        if key not in cache:
            cache[key] = laplace_scalar(mprof, key)
        out[i] = cache[key]
    return out


def laplace_type_multiplier(op: SelfAdjointOperator, mprof: MultiplierProfile, f) -> np.ndarray:
    """m̃(L) f with m̃(λ) = ∫₀^∞ tλ e^{-t²λ} m(t²) dt; ker L is sent to 0."""
    return op.apply_multiplier(laplace_multiplier_values(op, mprof), f)



# ---------------------------------------------------------------- boundedness harnesses


def _pair_norms(op, params):
    from .norms import besov_norm, triebel_norm

    return {"B": lambda g, a: besov_norm(op, g, params.with_(alpha=a)).value,
            "F": lambda g, a: triebel_norm(op, g, params.with_(alpha=a)).value}


def fractional_boundedness_check(op: SelfAdjointOperator, s: float, alpha: float = 0.0, p: float = 2.0,
                                 q: float = 2.0, w=None, samples: int = 100, seed: int = 7, *,
                                 band: int | None = None, baseline: dict | None = None, fields=None):
    """Ratios ‖L^{s/2} f‖ at α over ‖f‖ at α+s, in both the Besov and Triebel-Lizorkin scales."""
    from .equivalence import CaseResult, EquivalenceReport
    from .norms import NormParams
    from .sampling import DEFAULT_BAND, random_fields

    band = DEFAULT_BAND if band is None else band
    F = random_fields(op, samples, seed, band) if fields is None else np.atleast_2d(fields)
    G = fractional_power(op, F, s)
    params = NormParams(alpha=alpha, p=p, q=q, weight=w)
    rep = EquivalenceReport("fractional-boundedness", {"s": s, "alpha": alpha, "p": p, "q": q, "seed": seed,
                                                       "band": band}, int(F.shape[0]))
    for name, norm in _pair_norms(op, params).items():
        rep.cases.append(CaseResult(f"{name}:s={s:g}", {"s": s, "alpha": alpha, "p": p, "q": q},
                                    np.asarray(norm(G, alpha) / norm(F, alpha + s), dtype=np.float64)))
    return rep.gate(baseline)


def multiplier_boundedness_check(op: SelfAdjointOperator, mprof: MultiplierProfile, alpha: float = 0.0,
                                 p: float = 2.0, q: float = 2.0, w=None, samples: int = 100, seed: int = 7, *,
                                 band: int | None = None, baseline: dict | None = None, fields=None):
    """Ratios ‖m̃(L) f‖ / ‖f‖ in the same Besov and Triebel-Lizorkin space.

    ``notes["C_over_sup_m"]`` records the worst ratio divided by sup|m|.
    """
    from .equivalence import CaseResult, EquivalenceReport
    from .norms import NormParams
    from .sampling import DEFAULT_BAND, random_fields

    band = DEFAULT_BAND if band is None else band
    F = random_fields(op, samples, seed, band) if fields is None else np.atleast_2d(fields)
    G = laplace_type_multiplier(op, mprof, F)
    params = NormParams(alpha=alpha, p=p, q=q, weight=w)
    rep = EquivalenceReport("multiplier-boundedness", {"symbol": mprof.descriptor, "alpha": alpha, "p": p,
                                                       "q": q, "seed": seed, "band": band}, int(F.shape[0]))
    for name, norm in _pair_norms(op, params).items():
        rep.cases.append(CaseResult(name, {"alpha": alpha, "p": p, "q": q},
                                    np.asarray(norm(G, alpha) / norm(F, alpha), dtype=np.float64)))
    rep.gate(baseline)
    if mprof.bound > 0:
        rep.notes["C_over_sup_m"] = max(c.stats["max"] for c in rep.cases) / mprof.bound
    return rep
