"""Spectral profiles, partitions of unity, scale grids and the functional calculus."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import kernels
from .operator import SelfAdjointOperator

LN2 = math.log(2.0)


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    """Even scalar function F on [0, ∞) with support and vanishing-order metadata.

    ``support`` is ``(a, b)`` when F vanishes outside [a, b], else ``None``.
    ``vanish_order`` m means F(ξ) = ξ^{2m} φ(ξ) near 0.
    """

    func: Callable[[np.ndarray], np.ndarray]
    name: str
    support: tuple | None = None
    vanish_order: int = 0
    params: dict = field(default_factory=dict)

    def __call__(self, xi) -> np.ndarray:
        xi = np.abs(np.asarray(xi, dtype=np.float64))
        out = np.asarray(self.func(xi), dtype=np.float64)
        if self.support is not None:
            a, b = self.support
            out = np.where((xi > a) & (xi < b), out, 0.0)
        return out

    def describe(self) -> dict:
        return {"type": self.name, **self.params}

    def scaled_power(self, k: int) -> "SpectralProfile":
        """ξ ↦ ξ^{-2k} F(ξ), defined when F vanishes to order >= k (or away from 0)."""
        base = self

        def g(xi):
            with np.errstate(divide="ignore", invalid="ignore"):
                v = base(xi) / xi ** (2 * k)
            return np.where(xi > 0, v, 0.0)

        return SpectralProfile(g, f"{self.name}/xi^{2 * k}", self.support,
                               max(self.vanish_order - k, 0), {"base": self.describe(), "divide_order": k})


# ---------------------------------------------------------------- concrete profiles


def _bump_log(u, sharpness):
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(-sharpness / (1.0 - u[inside] ** 2))
    return out


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    """ψ supported in [1/2, 2] with Σ_j ψ(2^{-j}λ) = 1 on (0, ∞)."""

    psi: SpectralProfile
    c_psi: float
    sharpness: float

    def j_range(self, op: SelfAdjointOperator) -> range:
        """Dyadic indices j whose ψ_j can be nonzero on the positive spectrum."""
        lo = math.log2(math.sqrt(op.lambda_min_pos))
        hi = math.log2(math.sqrt(op.lambda_max))
        return range(math.floor(lo) - 1, math.ceil(hi) + 2)

    def psi_j(self, j: int, lam) -> np.ndarray:
        """ψ_j(√λ) = ψ(2^{-j}√λ)."""
        return self.psi(2.0 ** (-j) * np.sqrt(np.asarray(lam, dtype=np.float64)))

    def telescoping_error(self, lam, js) -> float:
        lam = np.asarray(lam, dtype=np.float64)
        total = sum(self.psi(2.0 ** (-j) * lam) for j in js)
        return float(np.abs(total - 1.0).max())


def make_partition_of_unity(sharpness: float = 1.0) -> PartitionOfUnity:
    """η(ξ) = exp(-s/(1-u²)), u = log₂ξ, normalised by its dyadic sum.

    Since Σ_j ψ(2^{u-j}) = 1 and ψ lives on u ∈ (-1, 1), ∫ψ dξ/ξ = ln 2 exactly.
    """

    def psi(xi):
        with np.errstate(divide="ignore"):
            u = np.log2(np.where(xi > 0, xi, 1e-300))
        num = _bump_log(u, sharpness)
        den = _bump_log(u + 1.0, sharpness) + num + _bump_log(u - 1.0, sharpness)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(num > 0, num / np.where(den > 0, den, 1.0), 0.0)

    prof = SpectralProfile(psi, "partition", (0.5, 2.0), 0, {"sharpness": sharpness} if sharpness != 1.0 else {})
    return PartitionOfUnity(prof, 1.0 / LN2, sharpness)


def heat_profile(m: int) -> SpectralProfile:
    """Ψ_m(ξ) = ξ^{2m} e^{-ξ²}, the profile of (t²L)^m e^{-t²L}."""
    return SpectralProfile(lambda xi: xi ** (2 * m) * np.exp(-xi * xi), "heat", None, m, {"m": m})


def sm_profile(m: int, base: str = "gauss") -> SpectralProfile:
    """ξ^{2m} φ(ξ) with an even Schwartz base φ (``gauss`` or ``sech``)."""
    if base == "gauss":
        return SpectralProfile(lambda xi: xi ** (2 * m) * np.exp(-xi * xi), "sm", None, m, {"m": m, "base": base})
    if base == "sech":
        return SpectralProfile(lambda xi: xi ** (2 * m) / np.cosh(np.minimum(xi, 700.0)), "sm", None, m,
                               {"m": m, "base": base})
    raise ValueError(f"unknown sm base {base!r}")


def constant_profile(value: float = 1.0) -> SpectralProfile:
    return SpectralProfile(lambda xi: np.full_like(xi, value), "constant", None, 0, {"value": value})


_PHI_NODES = None


def _phi_quadrature():
    global _PHI_NODES
    if _PHI_NODES is None:
        x, w = np.polynomial.legendre.leggauss(400)
        s = 0.25 * x
        ws = 0.25 * w
        dens = np.exp(-1.0 / (1.0 - (4.0 * s) ** 2))
        dens = dens / np.sum(dens * ws)  # unit mass: ∫φ = 2π after the 1/2π factor
        _PHI_NODES = (s, ws * dens)
    return _PHI_NODES


def make_compact_phi() -> SpectralProfile:
    """Φ(ξ) = (1/2π)∫φ(s)cos(sξ) ds for an even bump φ ≥ 0 on (-1/4, 1/4), ∫φ = 2π."""
    s, ws = _phi_quadrature()

    def Phi(xi):
        xi = np.asarray(xi, dtype=np.float64)
        flat = xi.ravel()
        out = np.empty_like(flat)
        step = 4096
        for i in range(0, flat.size, step):
            out[i:i + step] = np.cos(np.outer(flat[i:i + step], s)) @ ws
        return out.reshape(xi.shape)

    prof = SpectralProfile(Phi, "compact-phi", None, 0, {})
    grid = np.linspace(0.5, 2.0, 301)
    if not float(prof(grid).min()) > 0.5:
        raise ArithmeticError("Φ is not bounded below by 1/2 on [1/2, 2]")
    return prof


def profile_from_config(cfg: dict) -> SpectralProfile:
    kind = cfg.get("type")
    if kind == "partition":
        return make_partition_of_unity(cfg.get("sharpness", 1.0)).psi
    if kind == "heat":
        return heat_profile(int(cfg.get("m", 1)))
    if kind == "compact-phi":
        return make_compact_phi()
    if kind == "sm":
        return sm_profile(int(cfg.get("m", 1)), cfg.get("base", "gauss"))
    raise ValueError(f"unknown profile type {kind!r}")


# ---------------------------------------------------------------- scale grid


@dataclass(frozen=True, eq=False)
class ScaleGrid:
    """Log-uniform scales t_k = 2^{-nu_max} 2^{k/K} with trapezoid weights for dt/t."""

    nu_max: int
    points_per_octave: int
    n_points: int

    @cached_property
    def t(self) -> np.ndarray:
        k = np.arange(self.n_points)
        return 2.0 ** (-self.nu_max) * 2.0 ** (k / self.points_per_octave)

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_points, LN2 / self.points_per_octave)
        if self.n_points > 1:
            w[0] *= 0.5
            w[-1] *= 0.5
        return w

    @property
    def t_min(self) -> float:
        return float(self.t[0])

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    @cached_property
    def octave(self) -> np.ndarray:
        """Dyadic level ν with t_k ∈ (2^{-ν-1}, 2^{-ν}]."""
        k = np.arange(self.n_points)
        K = self.points_per_octave
        return self.nu_max - (k + K - 1) // K

    def covers(self, op: SelfAdjointOperator) -> bool:
        return (self.t_min <= 1.0 / (2 * math.sqrt(op.lambda_max)) * (1 + 1e-12)
                and self.t_max >= 2.0 / math.sqrt(op.lambda_min_pos) * (1 - 1e-12))

    @classmethod
    def for_operator(cls, op: SelfAdjointOperator, points_per_octave: int = 16, *, low_margin: int = 0,
                     high_margin: int = 0, nu_max: int | None = None) -> "ScaleGrid":
        """Smallest grid covering [1/(2√λ_max), 2/√λ₁⁺], widened by whole octaves on request."""
        lo = 1.0 / (2 * math.sqrt(op.lambda_max))
        hi = 2.0 / math.sqrt(op.lambda_min_pos)
        nm = math.ceil(-math.log2(lo) - 1e-12) + low_margin
        if nu_max is not None:
            nm = max(nm, nu_max)
        t0 = 2.0 ** (-nm)
        n = math.ceil(points_per_octave * (math.log2(hi / t0) + high_margin) - 1e-9) + 1
        return cls(nm, points_per_octave, n)

    @classmethod
    def for_profile(cls, op: SelfAdjointOperator, profile: SpectralProfile, points_per_octave: int = 16,
                    tail: float = 1e-6, **kw) -> "ScaleGrid":
        """Grid whose truncation error is negligible for ``profile``.

        Compactly supported profiles need only the spectral window. For others
        the window is widened until |profile| drops below ``tail`` times its peak
        at both ends (decay from the vanishing order below, from the profile above).
        """
        if profile.support is not None:
            return cls.for_operator(op, points_per_octave, **kw)
        xi = 2.0 ** np.linspace(-40, 12, 2081)
        v = np.abs(profile(xi))
        peak = v.max()
        big = np.flatnonzero(v > tail * peak)
        lo_xi, hi_xi = xi[big[0]], xi[big[-1]]
        low = max(0, math.ceil(math.log2(0.5 / lo_xi)))
        high = max(0, math.ceil(math.log2(hi_xi / 2.0)))
        return cls.for_operator(op, points_per_octave, low_margin=low, high_margin=high, **kw)

    def to_dict(self) -> dict:
        return {"nu_max": self.nu_max, "points_per_octave": self.points_per_octave, "n_points": self.n_points}


# ---------------------------------------------------------------- functional calculus


def apply_spectral(op: SelfAdjointOperator, F: SpectralProfile, t: float, f) -> np.ndarray:
    """F(t√L) f through the eigendecomposition."""
    if not t > 0:
        raise ValueError("t must be positive")
    return op.apply_multiplier(F(t * np.sqrt(op.eigenvalues)), f)


def spectral_multipliers(op: SelfAdjointOperator, F: SpectralProfile, ts) -> np.ndarray:
    """Matrix of F(t_k √λ_i), shape (len(ts), N)."""
    ts = np.asarray(ts, dtype=np.float64)
    return F(ts[:, None] * np.sqrt(op.eigenvalues)[None, :])


def spectral_stack(op: SelfAdjointOperator, F: SpectralProfile, ts, f) -> np.ndarray:
    """F(t_k√L) f for every scale; f may be (N,) or (S, N). Result (T, ..., N)."""
    mult = spectral_multipliers(op, F, ts)
    c = op.coefficients(f)
    out = (mult.reshape(mult.shape[:1] + (1,) * (c.ndim - 1) + mult.shape[1:]) * c[None]) @ op.eigenvectors.T
    return out


def dyadic_stack(op: SelfAdjointOperator, pou: PartitionOfUnity, f, js=None):
    """(js, ψ_j(√L) f) with ψ_j(√L) = ψ(2^{-j}√L)."""
    js = list(pou.j_range(op) if js is None else js)
    ts = 2.0 ** (-np.array(js, dtype=np.float64))
    return js, spectral_stack(op, pou.psi, ts, f)


def kernel_bound_check(op: SelfAdjointOperator, F1: SpectralProfile, F2: SpectralProfile | None, t: float,
                       s: float, N_decay: float, ell: int = 0) -> float:
    """C = max |K(x,y)| V(x∨y, t) (1 + d/t)^N (t/s)^{2ℓ} for K = F1(t√L)F2(s√L)."""
    if F2 is not None and ell > 0 and s > t * (1 + 1e-12):
        raise ValueError("the gain form needs s <= t")
    if F2 is not None and F2.vanish_order < ell:
        raise ValueError("F2 does not vanish to the requested order")
    sq = np.sqrt(op.eigenvalues)
    vals = F1(t * sq)
    if F2 is not None:
        vals = vals * F2(s * sq)
    K = op.kernel_of(vals)
    sp = op.space
    C = np.abs(K) * sp.volume_max(t) * (1.0 + sp.dist / t) ** N_decay
    return float(C.max() * (t / s) ** (2 * ell))


def calderon_multiplier(op: SelfAdjointOperator, pou: PartitionOfUnity, grid: ScaleGrid) -> np.ndarray:
    """c_ψ Σ_k w_k ψ(t_k√λ) per eigenvalue."""
    mult = spectral_multipliers(op, pou.psi, grid.t)
    return pou.c_psi * (grid.weights @ mult)


def calderon_reconstruct(op: SelfAdjointOperator, pou: PartitionOfUnity, grid: ScaleGrid, f):
    """Quadrature version of f = c_ψ ∫ψ(t√L)f dt/t; returns (f_hat, relative residual vs P⁺f)."""
    f = np.asarray(f, dtype=np.float64)
    f_hat = op.apply_multiplier(calderon_multiplier(op, pou, grid), f)
    target = op.project_positive(f)
    nf = np.linalg.norm(f, axis=-1)
    res = np.linalg.norm(f_hat - target, axis=-1) / np.where(nf > 0, nf, 1.0)
    res = np.where(nf > 0, res, 0.0)
    return f_hat, (float(res) if res.ndim == 0 else res)


def dyadic_reconstruct(op: SelfAdjointOperator, pou: PartitionOfUnity, f):
    """Σ_j ψ_j(√L) f over the covering j-range, with relative residual vs P⁺f."""
    js = pou.j_range(op)
    mult = sum(pou.psi_j(j, op.eigenvalues) for j in js)
    f = np.asarray(f, dtype=np.float64)
    g = op.apply_multiplier(mult, f)
    nf = np.linalg.norm(f, axis=-1)
    res = np.linalg.norm(g - op.project_positive(f), axis=-1) / np.where(nf > 0, nf, 1.0)
    res = np.where(nf > 0, res, 0.0)
    return g, (float(res) if res.ndim == 0 else res)


def peetre_maximal(op: SelfAdjointOperator, F: SpectralProfile, t: float, lam: float, f) -> np.ndarray:
    """F*_λ(t√L) f(x) = max_y |F(t√L) f(y)| / (1 + d(x,y)/t)^λ."""
    if not lam > 0:
        raise ValueError("decay exponent must be positive")
    g = np.abs(apply_spectral(op, F, t, f))
    G = np.atleast_2d(g)[None]
    out = kernels.peetre_max(G, op.space.dist, np.array([t], dtype=np.float64), float(lam))[0]
    return out[0] if g.ndim == 1 else out


def peetre_stack(op: SelfAdjointOperator, fields: np.ndarray, ts, lam: float) -> np.ndarray:
    """Peetre maxima of precomputed fields (T, S, N) or (T, N) at scales ``ts``."""
    A = np.abs(np.asarray(fields, dtype=np.float64))
    squeeze = A.ndim == 2
    if squeeze:
        A = A[:, None, :]
    out = kernels.peetre_max(np.ascontiguousarray(A), op.space.dist, np.asarray(ts, dtype=np.float64), float(lam))
    return out[:, 0, :] if squeeze else out


def dkp_partition(phi: SpectralProfile, eta: SpectralProfile, lam, ks) -> np.ndarray:
    """Σ_k φ(2^{-k}λ) η(2^{-k}λ) at ``lam`` (the classical dyadic resolution of 1)."""
    lam = np.asarray(lam, dtype=np.float64)
    return sum(phi(2.0 ** (-k) * lam) * eta(2.0 ** (-k) * lam) for k in ks)


def dkp_pair(pou: PartitionOfUnity):
    """Profiles (φ, η) with φη = ψ, η ≡ 1 on [1/2, 2] up to a smooth cutoff, and a head term Φ.

    φ = ψ / η where η is a wider smooth plateau; ``head(λ) = Σ_{k<0} φη(2^{-k}λ)``
    is the cumulative low-frequency part, so head(λ) + Σ_{k≥0} φη(2^{-k}λ) = 1.
    """
    wide = make_partition_of_unity(pou.sharpness)

    def eta_f(xi):
        return wide.psi(2 * xi) + wide.psi(xi) + wide.psi(xi / 2)

    eta = SpectralProfile(eta_f, "dkp-eta", (0.25, 4.0), 0, {})

    def phi_f(xi):
        e = eta_f(xi)
        return np.where(e > 0, pou.psi(xi) / np.where(e > 0, e, 1.0), 0.0)

    phi = SpectralProfile(phi_f, "dkp-phi", (0.5, 2.0), 0, {})

    def head_f(xi):
        xi = np.asarray(xi, dtype=np.float64)
        ks = range(1, 80)
        return np.where(xi <= 0, 1.0, sum(pou.psi(2.0 ** k * xi) for k in ks))

    head = SpectralProfile(head_f, "dkp-head", None, 0, {})
    return phi, eta, head


def resolved_scales(op: SelfAdjointOperator) -> list[float]:
    """Dyadic t between the mesh width and half the diameter, clipped to the spectral window."""
    sp = op.space
    lo = max(sp.min_distance, 0.5 / math.sqrt(op.lambda_max))
    hi = min(sp.diameter / 2, 2.0 / math.sqrt(op.lambda_min_pos))
    ks = range(math.floor(-math.log2(hi)) - 1, math.ceil(-math.log2(lo)) + 2)
    return [2.0 ** -k for k in ks if lo * (1 - 1e-12) <= 2.0 ** -k <= hi * (1 + 1e-12)]


def kernel_bound_sweep(op: SelfAdjointOperator, N_decay: float, *, ts=None, gain_steps: int = 10,
                       stability: float = 4.0, baseline: dict | None = None):
    """Measured kernel-bound constants over a (t, s) sweep.

    Families: single profiles ψ and ξ²e^{-ξ²}; the product ψ·ψ at s = t; and
    ψ(t√L)·Ψ_ℓ(s√L) with Ψ_ℓ(ξ) = ξ^{2ℓ}e^{-ξ²}, s = t 2^{-m}, m = 0..gain_steps.
    Each family must stay within a factor ``stability``. The ``gain`` cases
    compare the last two s-steps per t; an exact (s/t)^{2ℓ} gain makes them 1.
    """
    from .equivalence import CaseResult, EquivalenceReport

    ts = resolved_scales(op) if ts is None else list(ts)
    psi = make_partition_of_unity().psi
    fams = [("a:psi", psi, None, 0, [0]), ("a:heat1", heat_profile(1), None, 0, [0]),
            ("b:psi*psi", psi, psi, 0, [0])]
    fams += [(f"c:psi*heat{l}", psi, heat_profile(l), l, range(gain_steps + 1)) for l in (1, 2)]
    rep = EquivalenceReport("kernel-bounds", {"N_decay": N_decay, "t": ts, "gain_steps": gain_steps,
                                              "stability": stability}, len(ts))
    for label, F1, F2, ell, ms in fams:
        C = np.array([[kernel_bound_check(op, F1, F2, t, t * 2.0 ** -m, N_decay, ell) for m in ms] for t in ts])
        rep.cases.append(CaseResult(label, {"ell": ell, "m": list(ms)}, C.ravel(), max_spread=stability))
        if ell > 0:
            rep.cases.append(CaseResult(f"gain:l={ell}", {"ell": ell}, C[:, -1] / C[:, -2],
                                        extra_gate=("saturation", 0.99, 1.01)))
    return rep.gate(baseline)


# ---------------------------------------------------------------- maximal-function inequalities


def _decayed_sup(op, G, t, lam):
    """max_y |G(y)| (1 + d(x,y)/t)^{-λ} for each x; G is (S, N)."""
    return kernels.peetre_max(np.ascontiguousarray(np.abs(G))[None], op.space.dist,
                              np.array([t], dtype=np.float64), float(lam))[0]


def commuted_profile_constant(op: SelfAdjointOperator, psi: SpectralProfile, phi: SpectralProfile, t: float,
                              s: float, lam: float, F) -> float:
    """Worst ratio of the decayed sup of ψ(s√L)φ(t√L)f to that of φ(t√L)f."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    inner = apply_spectral(op, phi, t, F)
    num = _decayed_sup(op, apply_spectral(op, psi, s, inner), t, lam)
    den = _decayed_sup(op, inner, t, lam)
    ok = den > 0
    return float((num[ok] / den[ok]).max()) if ok.any() else 0.0


def peetre_subgrid_constant(op: SelfAdjointOperator, pou: PartitionOfUnity, j: int, lam: float, F,
                            points_per_octave: int = 16) -> float:
    """max over s ∈ [2^{-j-1}, 2^{-j}] of ψ*_λ(s√L)f against Σ_{k=j-2}^{j+3} ψ*_{k,λ}f."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    ss = 2.0 ** (-j - 1) * 2.0 ** (np.arange(points_per_octave + 1) / points_per_octave)
    lhs = np.max(peetre_stack(op, spectral_stack(op, pou.psi, ss, F), ss, lam), axis=0)
    ks = np.arange(j - 2, j + 4)
    ts = 2.0 ** (-ks.astype(np.float64))
    rhs = np.sum(peetre_stack(op, spectral_stack(op, pou.psi, ts, F), ts, lam), axis=0)
    ok = rhs > 0
    return float((lhs[ok] / rhs[ok]).max()) if ok.any() else 0.0


def self_improvement_constant(op: SelfAdjointOperator, psi: SpectralProfile, t: float, r: float, N: float,
                              grid: ScaleGrid, F) -> float:
    """Worst |ψ(t√L)f(x)|^r over the ScaleGrid discretization of the weighted double integral."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    sp = op.space
    lhs = np.abs(apply_spectral(op, psi, t, F)) ** r
    rhs = np.zeros_like(lhs)
    fields = spectral_stack(op, psi, grid.t, F)
    for s, wk, G in zip(grid.t, grid.weights, fields):
        K = (1.0 + sp.dist / s) ** (-N * r) / sp.volumes(s)[:, None] * sp.measure[None, :]
        rhs += wk * min(s / t, t / s) ** (N * r) * (np.abs(G) ** r @ K.T)
    ok = rhs > 0
    return float((lhs[ok] / rhs[ok]).max()) if ok.any() else 0.0
