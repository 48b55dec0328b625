"""Muckenhoupt weights on finite spaces: constants, norms, maximal operators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .space import MetricMeasureSpace

AP_THRESHOLD = 1e3
RH_THRESHOLD = 1e3


@dataclass(frozen=True, eq=False)
class Weight:
    """Positive density ``w`` together with the base measure it multiplies."""

    values: np.ndarray
    measure: np.ndarray
    descriptor: dict = field(default_factory=lambda: {"type": "explicit"})

    def __post_init__(self):
        w = np.asarray(self.values, dtype=np.float64)
        mu = np.asarray(self.measure, dtype=np.float64)
        if w.shape != mu.shape:
            raise ValueError("weight and measure shapes differ")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("weight must be positive and finite")
        w.setflags(write=False)
        object.__setattr__(self, "values", w)
        object.__setattr__(self, "measure", mu)

    @property
    def density(self) -> np.ndarray:
        """Pointwise w·μ."""
        return self.values * self.measure

    def mass(self, mask) -> float:
        """w(E) for a boolean mask or index array."""
        return float(self.density[mask].sum())

    def power(self, e: float) -> "Weight":
        return Weight(self.values ** e, self.measure, {"type": "power-of", "base": self.descriptor, "exponent": e})

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))


def constant_weight(space: MetricMeasureSpace, value: float = 1.0) -> Weight:
    return Weight(np.full(space.n_points, float(value)), space.measure, {"type": "constant"})


def power_weight(space: MetricMeasureSpace, center: int, exponent: float) -> Weight:
    """w(x) = (h + d(x, x0))**a with h the smallest positive distance."""
    h = space.min_distance
    w = (h + space.dist[center]) ** exponent
    return Weight(w, space.measure, {"type": "power", "center": int(center), "exponent": float(exponent)})


def explicit_weight(space: MetricMeasureSpace, values) -> Weight:
    return Weight(np.asarray(values, dtype=np.float64), space.measure, {"type": "explicit"})


def _averages(space: MetricMeasureSpace, g: np.ndarray) -> np.ndarray:
    """Averages of g over every distinct ball (unique representatives)."""
    balls = space.balls
    ind = balls.unique_indicator
    return (ind @ (g * space.measure)) / (ind @ space.measure)


def ap_constant(space: MetricMeasureSpace, w: Weight, p: float) -> float:
    """[w]_{A_p} by an exhaustive sweep over distinct balls.

    ``p == 1`` selects the A_1 branch ``sup_B avg_B w / min_B w``.
    """
    wv = w.values
    if p == 1:
        balls = space.balls
        mins = np.where(balls.unique_members, wv[None, :], np.inf).min(axis=1)
        return float((_averages(space, wv) / mins).max())
    if not p > 1:
        raise ValueError("p must be > 1 (or exactly 1 for the A_1 branch)")
    if not math.isfinite(p):
        raise ValueError("p must be finite")
    a = _averages(space, wv)
    b = _averages(space, wv ** (-1.0 / (p - 1.0)))
    return float((a ** (1.0 / p) * b ** ((p - 1.0) / p)).max())


def rh_constant(space: MetricMeasureSpace, w: Weight, q: float) -> float:
    """Smallest C with (avg_B w^q)^{1/q} <= C avg_B w over all balls."""
    if not q >= 1:
        raise ValueError("q must be >= 1")
    wv = w.values
    return float((_averages(space, wv ** q) ** (1.0 / q) / _averages(space, wv)).max())


@dataclass(frozen=True)
class ApReport:
    p: float
    ap_const: float
    rh: dict
    qw_est: float
    rw_est: float
    ap_curve: list
    rh_curve: list
    threshold: float

    def rh_const(self, q: float) -> float:
        return self.rh[q]

    def to_dict(self) -> dict:
        return {
            "p": self.p, "ap_const": self.ap_const, "rh": {str(k): v for k, v in self.rh.items()},
            "qw_est": self.qw_est, "rw_est": self.rw_est, "threshold": self.threshold,
            "ap_curve": self.ap_curve, "rh_curve": self.rh_curve,
        }


def _bisect(pred, lo: float, hi: float, tol: float) -> float:
    """Boundary of a monotone predicate: pred(lo) False, pred(hi) True."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def critical_indices(space: MetricMeasureSpace, w: Weight, p: float = 2.0, *, threshold: float = AP_THRESHOLD,
                     rh_threshold: float = RH_THRESHOLD, tol: float = 1e-3, p_max: float = 64.0,
                     r_max: float = 64.0) -> ApReport:
    """Estimate q_w = inf{q : [w]_{A_q} <= threshold} and r_w = sup{r : RH_r <= rh_threshold}.

    On a finite space every weight is in every class with some finite constant,
    so membership is replaced by the threshold test. Both curves are returned.
    """
    if ap_constant(space, w, 1.0) <= threshold:
        qw = 1.0
    elif ap_constant(space, w, p_max) > threshold:
        qw = math.inf
    else:
        qw = _bisect(lambda s: ap_constant(space, w, s) <= threshold, 1.0, p_max, tol)
    if rh_constant(space, w, r_max) <= rh_threshold:
        rw = r_max
    else:
        rw = _bisect(lambda s: rh_constant(space, w, s) > rh_threshold, 1.0, r_max, tol)
    grid = [1.0, 1.1, 1.25, 1.5, 2.0, 3.0, 4.0, 8.0, 16.0]
    ap_curve = [[g, ap_constant(space, w, g)] for g in grid]
    rh_curve = [[g, rh_constant(space, w, g)] for g in (1.0, 1.5, 2.0, 4.0, 8.0)]
    rh = {q: rh_constant(space, w, q) for q in (1.5, 2.0, 4.0)}
    return ApReport(p, ap_constant(space, w, p), rh, qw, rw, ap_curve, rh_curve, threshold)


def weighted_lp_norm(f, p: float, w: Weight) -> float:
    """(Σ |f|^p w μ)^{1/p}; p = inf gives max |f|."""
    f = np.abs(np.asarray(f, dtype=np.float64))
    if math.isinf(p):
        return float(f.max()) if f.size else 0.0
    if not p > 0:
        raise ValueError("p must be positive")
    return float(np.sum(f ** p * w.density) ** (1.0 / p))


def weighted_lp_norms(F: np.ndarray, p: float, w: Weight) -> np.ndarray:
    """Row-wise weighted_lp_norm of a (S, N) array."""
    F = np.abs(np.asarray(F, dtype=np.float64))
    if math.isinf(p):
        return F.max(axis=-1)
    return np.sum(F ** p * w.density, axis=-1) ** (1.0 / p)


def maximal_function(space: MetricMeasureSpace, f, r: float = 1.0, w: Weight | None = None) -> np.ndarray:
    """Exact M_{r,w} f: sup over balls containing x of weighted r-averages.

    ``f`` may be a vector or an (S, N) stack; the result has the same shape.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    F = np.atleast_2d(np.abs(np.asarray(f, dtype=np.float64)))
    dens = space.measure if w is None else w.density
    balls = space.balls
    ind = balls.unique_indicator
    avg = ((F ** r) @ (ind * dens[None, :]).T) / (ind @ dens)[None, :]
    indptr, indices = balls.csr
    out = kernels.ball_sup(avg, indptr, indices, space.n_points)
    out = out ** (1.0 / r)
    return out[0] if np.ndim(f) == 1 else out


def fefferman_stein_check(space: MetricMeasureSpace, family, p: float, q: float, r: float, w: Weight,
                          *, threshold: float = AP_THRESHOLD) -> float:
    """Empirical constant of the vector-valued maximal inequality.

    Uses the unweighted M_r on each member of ``family`` and weighted L^p norms.
    """
    F = np.atleast_2d(np.asarray(family, dtype=np.float64))
    if not 0 < r < min(p, q):
        raise ValueError("need 0 < r < min(p, q)")
    a = ap_constant(space, w, p / r)
    if not a <= threshold:
        raise ValueError(f"weight not in A_{p / r} under threshold {threshold} (constant {a:.3g})")
    Mf = maximal_function(space, F, r)

    def mixed(G):
        G = np.abs(G)
        col = G.max(axis=0) if math.isinf(q) else np.sum(G ** q, axis=0) ** (1.0 / q)
        return weighted_lp_norm(col, p, w)

    den = mixed(F)
    if den == 0:
        raise ZeroDivisionError("degenerate family: all members vanish")
    return mixed(Mf) / den


def doubling_measure_constant(space: MetricMeasureSpace, w: Weight, tree, p: float) -> float:
    """Smallest C with w(B)/w(E) <= C (V(B)/V(E))^p over (cube, parent ball) pairs."""
    worst = 0.0
    for c in tree.cubes:
        if c.parent is None:
            continue
        par = tree.cubes[c.parent]
        ball = space.ball(par.center, tree.ball_radius(par))
        we, wb = w.mass(c.members), w.mass(ball)
        ve, vb = space.measure[c.members].sum(), space.measure[ball].sum()
        worst = max(worst, (wb / we) / (vb / ve) ** p)
    return float(worst)
