"""Nonnegative μ-self-adjoint operators, heat kernels and kernel hypotheses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .space import MetricMeasureSpace, grid_coordinates

NEG_CLAMP = 1e-10


class OperatorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SelfAdjointOperator:
    """Matrix ``A`` acting on functions of a finite space, self-adjoint in L^2(μ).

    The eigendecomposition is computed once: ``A U = U diag(lam)`` with
    ``U.T diag(μ) U = I``. All spectral calculus goes through it.
    """

    matrix: np.ndarray
    space: MetricMeasureSpace
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=np.float64)
        mu = self.space.measure
        S = mu[:, None] * A
        scale = max(float(np.abs(S).max()), 1e-300)
        if float(np.abs(S - S.T).max()) > 1e-12 * scale:
            raise OperatorError("μA is not symmetric: operator is not μ-self-adjoint")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def _eig(self):
        mu = self.space.measure
        r = np.sqrt(mu)
        S = (r[:, None] * self.matrix) / r[None, :]
        S = 0.5 * (S + S.T)
        lam, V = np.linalg.eigh(S)
        lmax = max(float(lam[-1]), 0.0)
        if lam[0] < -NEG_CLAMP * max(lmax, 1e-300):
            raise OperatorError(f"operator is not nonnegative (λ_min = {lam[0]:.3e})")
        lam = np.where(lam < NEG_CLAMP * lmax, 0.0, lam)
        U = V / r[:, None]
        lam.setflags(write=False)
        U.setflags(write=False)
        return lam, U

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eig[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._eig[1]

    @cached_property
    def kernel_dim(self) -> int:
        return int(np.count_nonzero(self.eigenvalues == 0.0))

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def lambda_min_pos(self) -> float:
        pos = self.eigenvalues[self.eigenvalues > 0]
        if pos.size == 0:
            raise OperatorError("operator has no positive spectrum")
        return float(pos[0])

    def coefficients(self, f) -> np.ndarray:
        """μ-spectral coefficients U^T diag(μ) f (works on stacks along the last axis)."""
        f = np.asarray(f, dtype=np.float64)
        return (f * self.space.measure) @ self.eigenvectors

    def synthesize(self, c) -> np.ndarray:
        return np.asarray(c) @ self.eigenvectors.T

    def apply_multiplier(self, values, f) -> np.ndarray:
        """U diag(values) U^T diag(μ) f for a vector of eigen-multipliers."""
        return self.synthesize(self.coefficients(f) * values)

    def kernel_of(self, values) -> np.ndarray:
        """Kernel K(x, y) of the multiplier, in the (Tf)(x) = Σ_y K f μ convention."""
        U = self.eigenvectors
        return (U * values) @ U.T

    def apply(self, f, power: int = 1) -> np.ndarray:
        """Plain matrix application A^power f."""
        g = np.asarray(f, dtype=np.float64)
        for _ in range(power):
            g = g @ self.matrix.T
        return g

    def project_kernel(self, f) -> np.ndarray:
        """Component of f in ker L."""
        return self.apply_multiplier((self.eigenvalues == 0).astype(float), f)

    def project_positive(self, f) -> np.ndarray:
        """P⁺ f = f minus its ker L component."""
        return self.apply_multiplier((self.eigenvalues > 0).astype(float), f)

    @cached_property
    def stencil_reach(self) -> float:
        """Largest distance spanned by a nonzero off-diagonal entry of A."""
        off = (self.matrix != 0) & ~np.eye(self.n, dtype=bool)
        return float(self.space.dist[off].max()) if off.any() else 0.0


def build_laplacian(space: MetricMeasureSpace, kind: str = "grid", normalization: str = "unit-speed") -> SelfAdjointOperator:
    """Graph/grid Laplacian ``A = diag(μ)^{-1}(D - W)``.

    For ``kind="grid"`` neighbours are lattice sites at one step; for
    ``kind="graph"`` they are the configured edges. With ``unit-speed`` the
    conductance of an edge of length ``l`` is ``μ_edge / l**2`` so that the grid
    operator is the standard finite-difference ``-Δ_h``; with ``none`` every
    edge has conductance 1.
    """
    if normalization not in ("none", "unit-speed"):
        raise ValueError(f"unknown normalization {normalization!r}")
    n = space.n_points
    mu = space.measure
    W = np.zeros((n, n))
    if kind == "grid":
        if space.meta.get("type") != "grid":
            raise ValueError("grid Laplacian needs a grid space")
        h = space.meta["spacing"]
        coords = grid_coordinates(space)
        side = space.meta["side"]
        periodic = space.meta["boundary"] == "periodic"
        index = {tuple(c): i for i, c in enumerate(coords)}
        for i, c in enumerate(coords):
            for k in range(space.meta["dim"]):
                for step in (-1, 1):
                    v = list(c)
                    v[k] += step
                    if periodic:
                        v[k] %= side
                    elif not 0 <= v[k] < side:
                        continue
                    j = index[tuple(v)]
                    W[i, j] = math.sqrt(mu[i] * mu[j]) / h ** 2 if normalization == "unit-speed" else 1.0
    elif kind == "graph":
        edges = space.meta.get("edges")
        if edges is None:
            raise ValueError("graph Laplacian needs a graph space with edges")
        if not space.is_connected():
            raise ValueError("graph is not connected")
        for i, j, ln in edges:
            c = math.sqrt(mu[i] * mu[j]) / ln ** 2 if normalization == "unit-speed" else 1.0
            W[i, j] += c
            W[j, i] += c
    else:
        raise ValueError(f"unknown Laplacian kind {kind!r}")
    A = (np.diag(W.sum(axis=1)) - W) / mu[:, None]
    return SelfAdjointOperator(A, space, {"kind": kind, "normalization": normalization})


# ---------------------------------------------------------------- heat kernel


def heat_kernel(op: SelfAdjointOperator, t: float) -> np.ndarray:
    """p_t(x, y) with (e^{-tL} f)(x) = Σ_y p_t(x, y) f(y) μ(y)."""
    if not t > 0:
        raise ValueError("t must be positive")
    return op.kernel_of(np.exp(-t * op.eigenvalues))


def heat_apply(op: SelfAdjointOperator, t: float, f) -> np.ndarray:
    return op.apply_multiplier(np.exp(-t * op.eigenvalues), f)


@dataclass(frozen=True)
class HeatKernelReport:
    t_grid: list
    C: float
    c: float
    success: bool
    max_violation: float
    holder_delta0: float
    holder_C: float
    conservation_defect: float
    candidates: dict

    def to_dict(self) -> dict:
        return {
            "t_grid": self.t_grid, "C": self.C, "c": self.c, "success": self.success,
            "max_violation": self.max_violation, "holder_delta0": self.holder_delta0,
            "holder_C": self.holder_C, "conservation_defect": self.conservation_defect,
            "candidates": {str(k): v for k, v in self.candidates.items()},
        }


def gaussian_bound_fit(op: SelfAdjointOperator, t_grid, c_candidates=(2.0, 4.0, 8.0, 16.0),
                       c_max: float = 1e6) -> HeatKernelReport:
    """Fit |p_t(x,y)| <= C V(x,√t)^{-1} exp(-d²/(ct)) and the Hölder exponent.

    For each ``c`` the minimal ``C`` is the exhaustive maximum of the ratio; the
    smallest ``C`` wins. The Hölder exponent is the slope of the upper envelope
    of ``|p_t(x,y) - p_t(x̄,y)| V(x,√t) exp(d(x,y)²/(ct))`` against
    ``d(x,x̄)/√t`` over pairs with ``d(x,x̄) < √t``.
    """
    sp = op.space
    h = sp.min_distance
    t_grid = [float(t) for t in t_grid]
    lo, hi = h * h / 4, sp.diameter ** 2
    for t in t_grid:
        if not lo * (1 - 1e-12) <= t <= hi * (1 + 1e-12):
            raise ValueError(f"t={t} outside [h²/4, diam²]")
    d2 = sp.dist ** 2
    kernels = [heat_kernel(op, t) for t in t_grid]
    vols = [sp.volumes(math.sqrt(t)) for t in t_grid]
    cands = {}
    for c in c_candidates:
        worst = 0.0
        for t, P, V in zip(t_grid, kernels, vols):
            with np.errstate(over="ignore"):
                r = np.abs(P) * V[:, None] * np.exp(d2 / (c * t))
            worst = max(worst, float(r.max()))
        cands[c] = worst
    c_best = min(cands, key=lambda k: (cands[k], k))
    C = cands[c_best]
    success = C <= c_max
    defect = 0.0
    for P in kernels:
        defect = max(defect, float(np.abs(sp.measure @ P - 1.0).max()))
    delta0, holder_C = _holder_fit(op, t_grid, kernels, vols, c_best)
    return HeatKernelReport(t_grid, C, c_best, bool(success), 1.0 if success else math.inf,
                            delta0, holder_C, defect, cands)


def _holder_fit(op, t_grid, kernels, vols, c):
    sp = op.space
    d = sp.dist
    rhos, vals = [], []
    for t, P, V in zip(t_grid, kernels, vols):
        st = math.sqrt(t)
        xs, xbs = np.nonzero((d > 0) & (d < st * (1 - 1e-10)))
        if xs.size == 0:
            continue
        diff = np.abs(P[xs] - P[xbs])
        env = diff * V[xs][:, None] * np.exp(d[xs] ** 2 / (c * t))
        rhos.append(d[xs, xbs] / st)
        vals.append(env.max(axis=1))
    if not rhos:
        return 1.0, 0.0
    rho = np.concatenate(rhos)
    val = np.concatenate(vals)
    # upper envelope per distinct rho, then a log-log slope
    keys = np.round(np.log(rho), 9)
    uk = np.unique(keys)
    env = np.array([val[keys == k].max() for k in uk])
    x = uk
    ok = env > 0
    if ok.sum() < 2:
        return 1.0, float(env.max()) if env.size else 0.0
    slope = float(np.polyfit(x[ok], np.log(env[ok]), 1)[0])
    delta0 = min(max(slope, 0.0), 1.0)
    holder_C = float((val / rho ** delta0).max())
    return delta0, holder_C


def wave_support_profile(op: SelfAdjointOperator, t: float, drop: float = 1e-3) -> dict:
    """Decay of the cos(t√L) kernel away from the diagonal.

    Returns ``rho_over_t`` / ``profile`` arrays where profile[k] is the max of
    |K(x,y)| over pairs with d(x,y) > rho_k, the first rho/t at which the
    profile falls below ``drop`` times its peak, and the residual beyond 2t.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    K = op.kernel_of(np.cos(t * np.sqrt(op.eigenvalues)))
    d = op.space.dist
    rhos = np.concatenate([[0.0], op.space.distance_values])
    A = np.abs(K)
    peak = float(A.max())
    prof = np.array([float(A[d > r * (1 + 1e-10)].max()) if np.any(d > r * (1 + 1e-10)) else 0.0 for r in rhos])
    below = np.flatnonzero(prof <= drop * peak)
    drop_at = float(rhos[below[0]] / t) if below.size else math.inf
    beyond = d > 2 * t * (1 + 1e-10)
    residual = float(A[beyond].max() / peak) if beyond.any() else 0.0
    return {"t": t, "rho_over_t": (rhos / t).tolist(), "profile": prof.tolist(), "peak": peak,
            "drop_at": drop_at, "residual_beyond_2t": residual}
