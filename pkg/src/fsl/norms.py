"""Besov, Triebel-Lizorkin, F∞, BMO, Hardy and Sobolev norms on a finite space.

Every function accepts a single field ``(N,)`` or a stack ``(S, N)``; values
come back as a float or an ``(S,)`` array inside a :class:`NormValue`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .calculus import (
    PartitionOfUnity,
    ScaleGrid,
    SpectralProfile,
    heat_profile,
    make_partition_of_unity,
    peetre_stack,
    spectral_multipliers,
    spectral_stack,
)
from .operator import SelfAdjointOperator
from .space import MetricMeasureSpace, estimate_doubling
from .weights import Weight, constant_weight, critical_indices, weighted_lp_norms

FLAVORS_B = ("dyadic", "continuous", "peetre")
FLAVORS_F = ("dyadic", "continuous", "peetre", "g-function", "lusin")


@dataclass(frozen=True)
class NormParams:
    """Parameter bundle for one norm evaluation.

    ``profile`` replaces ψ in the continuous and Peetre flavors (used for the
    𝒮_m and heat characterizations); ``pou`` drives the dyadic flavor.
    ``grid=None`` selects a grid adapted to the profile at 16 points/octave.
    """

    alpha: float = 0.0
    p: float = 2.0
    q: float = 2.0
    weight: Weight | None = None
    pou: PartitionOfUnity | None = None
    profile: SpectralProfile | None = None
    lambda_exp: float | None = None
    grid: ScaleGrid | None = None
    flavor: str = "dyadic"
    aperture: float = 1.0
    validate: bool = True

    def with_(self, **kw) -> "NormParams":
        return replace(self, **kw)


@dataclass
class NormValue:
    value: float | np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------- helpers


@lru_cache(maxsize=64)
def _doubling(space: MetricMeasureSpace):
    return estimate_doubling(space)


@lru_cache(maxsize=64)
def _qw(space: MetricMeasureSpace, w: Weight) -> float:
    return critical_indices(space, w).qw_est


def homogeneous_dimension(space: MetricMeasureSpace) -> float:
    return _doubling(space).n_exp


def critical_index(space: MetricMeasureSpace, w: Weight) -> float:
    if w.is_constant:
        return 1.0
    return _qw(space, w)


def peetre_threshold(space: MetricMeasureSpace, w: Weight, p: float, q: float | None = None) -> float:
    """n q_w / p, or n q_w / min(p, q) when ``q`` is given."""
    r = p if q is None else min(p, q)
    return homogeneous_dimension(space) * critical_index(space, w) / r


def _weight(op, params) -> Weight:
    return params.weight if params.weight is not None else constant_weight(op.space)


def _pou(params) -> PartitionOfUnity:
    return params.pou if params.pou is not None else make_partition_of_unity()


def _profile(params) -> SpectralProfile:
    return params.profile if params.profile is not None else _pou(params).psi


def _grid(op, params) -> ScaleGrid:
    if params.grid is not None:
        return params.grid
    return ScaleGrid.for_profile(op, _profile(params), 16)


def _lq(X: np.ndarray, q: float, weights=None, axis: int = 0) -> np.ndarray:
    """(Σ w X^q)^{1/q} along ``axis``; q = ∞ gives the max."""
    X = np.abs(X)
    if math.isinf(q):
        return X.max(axis=axis)
    if weights is None:
        return np.sum(X ** q, axis=axis) ** (1.0 / q)
    shape = [1] * X.ndim
    shape[axis] = -1
    return np.sum(np.asarray(weights).reshape(shape) * X ** q, axis=axis) ** (1.0 / q)


def _as_stack(f):
    f = np.asarray(f, dtype=np.float64)
    return f[None, :] if f.ndim == 1 else f, f.ndim == 1


def _finish(vals: np.ndarray, single: bool, diag: dict) -> NormValue:
    return NormValue(float(vals[0]) if single else vals, diag)


def _peetre_lambda(op, params, w) -> float:
    lam = params.lambda_exp
    thr = peetre_threshold(op.space, w, params.p)
    if lam is None:
        lam = thr + 1.0
    elif params.validate and not lam > thr:
        raise ValueError(f"Peetre exponent {lam} must exceed n q_w / p = {thr:.4g}")
    return float(lam)


def _dyadic_fields(op, params, F):
    pou = _pou(params)
    js = np.array(list(pou.j_range(op)), dtype=np.float64)
    fields = spectral_stack(op, pou.psi, 2.0 ** (-js), F)  # (J, S, N)
    return js, fields


def _continuous_fields(op, params, F):
    grid = _grid(op, params)
    fields = spectral_stack(op, _profile(params), grid.t, F)  # (T, S, N)
    return grid, fields


# ---------------------------------------------------------------- Besov


def besov_norm(op: SelfAdjointOperator, f, params: NormParams) -> NormValue:
    """Homogeneous weighted Besov norm in the dyadic, continuous or Peetre flavor."""
    if params.flavor not in FLAVORS_B:
        raise ValueError(f"unknown Besov flavor {params.flavor!r}")
    F, single = _as_stack(f)
    w = _weight(op, params)
    a, p, q = params.alpha, params.p, params.q
    if params.flavor == "dyadic":
        js, fields = _dyadic_fields(op, params, F)
        per = (2.0 ** (js * a))[:, None] * weighted_lp_norms(fields, p, w)  # (J, S)
        vals = _lq(per, q)
        return _finish(vals, single, {"scales": js.tolist(), "per_scale": per[:, 0].tolist() if single else None})
    grid, fields = _continuous_fields(op, params, F)
    if params.flavor == "peetre":
        fields = peetre_stack(op, fields, grid.t, _peetre_lambda(op, params, w))
    per = (grid.t ** (-a))[:, None] * weighted_lp_norms(fields, p, w)
    vals = _lq(per, q, grid.weights)
    return _finish(vals, single, {"grid": grid.to_dict()})


# ---------------------------------------------------------------- Triebel-Lizorkin


def _square_function(op, grid, fields, alpha, q, kind, lam=None, aperture=1.0):
    """Pointwise g-function or Lusin function of a field stack (T, S, N) -> (S, N)."""
    if math.isinf(q):
        raise ValueError("square functions need q < ∞")
    sp = op.space
    d = sp.dist
    acc = np.zeros(fields.shape[1:])
    mu = sp.measure
    for k, t in enumerate(grid.t):
        V = sp.volumes(t)
        if kind == "g-function":
            D = (1.0 + d / t) ** (-lam * q)
        else:
            D = sp.ball_matrix(aperture * t)
        D = D * mu[None, :] / V[:, None]
        G = (t ** (-alpha) * np.abs(fields[k])) ** q  # (S, N)
        acc += grid.weights[k] * (G @ D.T)
    return acc ** (1.0 / q)


def triebel_norm(op: SelfAdjointOperator, f, params: NormParams) -> NormValue:
    """Homogeneous weighted Triebel-Lizorkin norm (p < ∞) in any of five flavors."""
    if params.flavor not in FLAVORS_F:
        raise ValueError(f"unknown Triebel-Lizorkin flavor {params.flavor!r}")
    if math.isinf(params.p):
        raise ValueError("p = ∞ is handled by f_infinity_norm")
    F, single = _as_stack(f)
    w = _weight(op, params)
    a, p, q = params.alpha, params.p, params.q
    if params.flavor == "dyadic":
        js, fields = _dyadic_fields(op, params, F)
        inner = _lq((2.0 ** (js * a))[:, None, None] * fields, q)  # (S, N)
        return _finish(weighted_lp_norms(inner, p, w), single, {"scales": js.tolist()})
    grid, fields = _continuous_fields(op, params, F)
    if params.flavor in ("continuous", "peetre"):
        if params.flavor == "peetre":
            fields = peetre_stack(op, fields, grid.t, _peetre_lambda(op, params, w))
        inner = _lq((grid.t ** (-a))[:, None, None] * fields, q, grid.weights)
    elif params.flavor == "g-function":
        lam = params.lambda_exp
        if lam is None:
            lam = peetre_threshold(op.space, w, p, q) + 1.0
        inner = _square_function(op, grid, fields, a, q, "g-function", lam=lam)
    else:
        if params.aperture < 1:
            raise ValueError("Lusin aperture must be >= 1")
        inner = _square_function(op, grid, fields, a, q, "lusin", aperture=params.aperture)
    return _finish(weighted_lp_norms(inner, p, w), single, {"grid": grid.to_dict()})


def g_function(op, grid, fields, alpha, q, lam) -> np.ndarray:
    """𝒢^α_{λ,q} of a precomputed field stack (T, S, N)."""
    return _square_function(op, grid, np.asarray(fields), alpha, q, "g-function", lam=lam)


def lusin_function(op, grid, fields, alpha, q, aperture=1.0) -> np.ndarray:
    """𝒮^α_{a,q} of a precomputed field stack (T, S, N)."""
    return _square_function(op, grid, np.asarray(fields), alpha, q, "lusin", aperture=aperture)


# ---------------------------------------------------------------- F∞


def f_infinity_norm(op: SelfAdjointOperator, f, alpha: float = 0.0, q: float = 2.0, w: Weight | None = None,
                    flavor: str = "dyadic", *, pou: PartitionOfUnity | None = None, grid: ScaleGrid | None = None,
                    lambda_exp: float | None = None, p_class: float = 2.0) -> NormValue:
    """Carleson-type F∞ norm, exhaustive over all balls (center, radius).

    ``dyadic``: sup_Q (V(Q)/w(Q)² Σ_{j ≥ -log₂ r_Q} ∫_Q (2^{jα}|ψ_j f|)^q)^{1/q}.
    ``continuous``/``peetre``: sup_{x,t} (V/w(B)² ∫_B ∫_0^t (s^{-α}|ψ(s√L)f|)^q ds/s)^{1/q},
    with ψ replaced by ψ*_λ in the Peetre case (λ defaults to n p/q + 2n p²/q + 1,
    ``p_class`` being the A_p class of the weight).
    """
    F, single = _as_stack(f)
    sp = op.space
    w = w if w is not None else constant_weight(sp)
    pou = pou if pou is not None else make_partition_of_unity()
    balls = sp.balls
    wmass = balls.indicator @ w.density
    vmass = balls.mass
    factor = vmass / wmass ** 2
    radii = balls.radii
    S = F.shape[0]
    if flavor == "dyadic":
        js = np.array(list(pou.j_range(op)), dtype=np.float64)
        fields = spectral_stack(op, pou.psi, 2.0 ** (-js), F)
        G = (2.0 ** (js * alpha))[:, None, None] * np.abs(fields)  # (J, S, N)
        with np.errstate(divide="ignore"):
            j0 = np.where(np.isinf(radii), -np.inf, np.ceil(-np.log2(radii) - 1e-12))
        scale_of_ball = [js >= j for j in j0]
    elif flavor in ("continuous", "peetre"):
        grid = grid if grid is not None else ScaleGrid.for_operator(op, 16)
        fields = spectral_stack(op, pou.psi, grid.t, F)
        if flavor == "peetre":
            n = homogeneous_dimension(sp)
            lam = lambda_exp if lambda_exp is not None else n * p_class / q + 2 * n * p_class ** 2 / q + 1.0
            fields = peetre_stack(op, fields, grid.t, lam)
        G = (grid.t ** (-alpha))[:, None, None] * np.abs(fields)
        scale_of_ball = [grid.t <= r * (1 + 1e-12) for r in radii]
        js = grid.t
    else:
        raise ValueError(f"unknown F∞ flavor {flavor!r}")
    if math.isinf(q):
        # sup over the tent {(x, scale): x ∈ Q, scale admissible}
        vals = np.zeros(S)
        for b in range(len(radii)):
            sel = scale_of_ball[b]
            if sel.any():
                m = G[sel][:, :, balls.members[b]].max(axis=(0, 2))
                vals = np.maximum(vals, m)
        return _finish(vals, single, {"flavor": flavor})
    Gq = G ** q
    if flavor != "dyadic":
        Gq = Gq * grid.weights[:, None, None]
    # balls sharing the same admissible-scale set share one cumulative field
    groups: dict[bytes, list[int]] = {}
    for b in range(len(radii)):
        groups.setdefault(scale_of_ball[b].tobytes(), []).append(b)
    vals = np.zeros(S)
    mu = sp.measure
    for idx in groups.values():
        sel = scale_of_ball[idx[0]]
        if not sel.any():
            continue
        A = Gq[sel].sum(axis=0) * mu[None, :]  # (S, N)
        integ = A @ balls.indicator[idx].T  # (S, nb)
        vals = np.maximum(vals, (integ * factor[idx][None, :]).max(axis=1))
    return _finish(vals ** (1.0 / q), single, {"flavor": flavor})


# ---------------------------------------------------------------- identification norms


def bmo_l_norm(op: SelfAdjointOperator, f, w: Weight | None = None) -> NormValue:
    """sup_B w(B)^{-1} ∫_B |(I - e^{-r_B² L}) f| dμ over every (center, radius) ball."""
    F, single = _as_stack(f)
    sp = op.space
    w = w if w is not None else constant_weight(sp)
    balls = sp.balls
    lam = op.eigenvalues
    vals = np.zeros(F.shape[0])
    c = op.coefficients(F)
    for r in np.unique(balls.radii):
        if math.isinf(r):
            mult = (lam > 0).astype(float)
        else:
            mult = 1.0 - np.exp(-(r * r) * lam)
        g = np.abs((c * mult) @ op.eigenvectors.T) * sp.measure  # (S, N)
        sel = balls.radii == r
        ind = balls.indicator[sel]
        num = g @ ind.T
        den = ind @ w.density
        vals = np.maximum(vals, (num / den).max(axis=1))
    return _finish(vals, single, {})


def classical_bmo_norm(op: SelfAdjointOperator, f, w: Weight | None = None) -> NormValue:
    """sup_B w(B)^{-1} ∫_B |f - f_B| dμ with f_B the μ-average over B."""
    F, single = _as_stack(f)
    sp = op.space
    w = w if w is not None else constant_weight(sp)
    ind = sp.balls.unique_indicator
    mu = sp.measure
    vol = ind @ mu
    avg = (F * mu) @ ind.T / vol  # (S, B)
    vals = np.zeros(F.shape[0])
    for b in range(ind.shape[0]):
        m = ind[b] > 0
        osc = np.abs(F[:, m] - avg[:, b:b + 1]) @ mu[m]
        vals = np.maximum(vals, osc / w.mass(m))
    return _finish(vals, single, {})


def hardy_norm(op: SelfAdjointOperator, f, p: float, w: Weight | None = None, grid: ScaleGrid | None = None) -> NormValue:
    """‖S_L f‖_{p,w} with S_L the aperture-1 Lusin function of t²L e^{-t²L} f."""
    if not 0 < p <= 1:
        raise ValueError("Hardy norm needs 0 < p <= 1")
    prof = heat_profile(1)
    params = NormParams(alpha=0.0, p=p, q=2.0, weight=w, profile=prof, grid=grid, flavor="lusin")
    return triebel_norm(op, f, params)


def sobolev_norm(op: SelfAdjointOperator, f, s: float, p: float, w: Weight | None = None) -> NormValue:
    """‖L^{s/2} f‖_{p,w}."""
    from .apps import fractional_power

    F, single = _as_stack(f)
    w = w if w is not None else constant_weight(op.space)
    g = fractional_power(op, F, s, check=False)
    return _finish(weighted_lp_norms(g, p, w), single, {})


def lp_norm_positive(op: SelfAdjointOperator, f, p: float, w: Weight | None = None) -> NormValue:
    """‖P⁺ f‖_{p,w}."""
    F, single = _as_stack(f)
    w = w if w is not None else constant_weight(op.space)
    return _finish(weighted_lp_norms(op.project_positive(F), p, w), single, {})


def parseval_band(op: SelfAdjointOperator, pou: PartitionOfUnity | None = None) -> tuple[float, float]:
    """[min, max] of (Σ_j ψ_j(√λ)²)^{1/2} over the positive spectrum."""
    pou = pou if pou is not None else make_partition_of_unity()
    lam = op.eigenvalues[op.eigenvalues > 0]
    s = sum(pou.psi_j(j, lam) ** 2 for j in pou.j_range(op))
    r = np.sqrt(s)
    return float(r.min()), float(r.max())
