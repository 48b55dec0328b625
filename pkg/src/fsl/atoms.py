"""Constructive (L, M, p, w) atomic decomposition, synthesis bounds and atom checks.

Octaves (2^{-ν-1}, 2^{-ν}] of the scale grid are matched with the dyadic
level ν. Per cube Q ∈ 𝒟_ν:

    s_Q = w(Q)^{1/p} max_{y∈Q} Σ_k w_k |ψ_M(t_k√L) f(y)|
    b_Q = s_Q^{-1} Σ_k w_k t_k^{2M} Φ(t_k√L)[ψ_M(t_k√L) f · χ_Q]
    a_Q = L^M b_Q

with ψ_M(ξ) = ξ^{-2M} ψ(ξ), the sums running over the grid points of the
octave. Because the cubes of a level partition the space,
c Σ s_Q a_Q equals the grid quadrature of c ∫ ψ(t√L)Φ(t√L) f dt/t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .calculus import PartitionOfUnity, ScaleGrid, SpectralProfile, make_compact_phi, make_partition_of_unity
from .operator import SelfAdjointOperator
from .space import DyadicCubeTree, build_dyadic_cubes, default_levels
from .weights import Weight, constant_weight

EPS_SUPPORT = 1e-8
CANCEL_TOL = 1e-10
ZERO_RTOL = 1e-12  # s_Q below this fraction of the largest coefficient is round-off


class AtomError(ValueError):
    pass


@dataclass
class Atom:
    cube_id: int
    level: int
    center: int
    M: int
    s_coeff: float
    b: np.ndarray
    a: np.ndarray
    support_eps: float  # max over k = 0..2M of sup outside 3B_Q / sup overall of |L^k b|
    support_eps_k: list
    size_consts: list  # C_k = max|L^k b| / (ℓ(Q)^{2(M-k)} w(Q)^{-1/p})
    cancellation: float  # |Σ a μ| / Σ |a| μ

    @property
    def size_const_low(self) -> float:
        return max(self.size_consts[: self.M + 1])

    @property
    def size_const_high(self) -> float:
        return max(self.size_consts[self.M + 1:])

    def to_dict(self, dense: bool = False) -> dict:
        d = {"cube_id": self.cube_id, "level": self.level, "center": self.center, "s_Q": self.s_coeff,
             "support_eps": self.support_eps, "size_consts": self.size_consts, "cancellation": self.cancellation}
        if dense:
            d["b"] = self.b.tolist()
        return d


@dataclass
class Decomposition:
    atoms: list
    skipped: list
    params: dict
    norm_const: float
    tree: DyadicCubeTree = field(repr=False)
    weight: Weight = field(repr=False)
    source: np.ndarray | None = field(default=None, repr=False)

    @property
    def max_support_eps(self) -> float:
        return max((a.support_eps for a in self.atoms), default=0.0)

    def support_by_level(self) -> dict:
        out: dict[int, float] = {}
        for a in self.atoms:
            out[a.level] = max(out.get(a.level, 0.0), a.support_eps)
        return dict(sorted(out.items()))

    def size_constants(self) -> dict:
        lo = [a.size_const_low for a in self.atoms]
        hi = [a.size_const_high for a in self.atoms]
        return {"k<=M": [min(lo), max(lo)] if lo else [0.0, 0.0],
                "k>M": [min(hi), max(hi)] if hi else [0.0, 0.0]}

    def to_dict(self, dense: bool = False) -> dict:
        return {"params": self.params, "norm_const": self.norm_const, "n_atoms": len(self.atoms),
                "skipped": self.skipped, "max_support_eps": self.max_support_eps,
                "support_eps_by_level": {str(k): v for k, v in self.support_by_level().items()},
                "size_constants": self.size_constants(),
                "atoms": [a.to_dict(dense) for a in self.atoms]}


def calderon_pair_constant(pou: PartitionOfUnity, phi: SpectralProfile, n: int = 1 << 14) -> float:
    """∫₀^∞ ψ(ξ)Φ(ξ) dξ/ξ on a fine log grid over the support of ψ."""
    a, b = pou.psi.support
    u = np.linspace(math.log(a), math.log(b), n + 1)
    xi = np.exp(u)
    v = pou.psi(xi) * phi(xi)
    return float(trapezoid(v, u))


def _check_ball(space, tree: DyadicCubeTree, cube) -> np.ndarray:
    return space.ball(cube.center, tree.ball_radius(cube, 3.0))


def _power_stack(op: SelfAdjointOperator, b: np.ndarray, kmax: int) -> list:
    out = [b]
    for _ in range(kmax):
        out.append(op.apply(out[-1]))
    return out


def _atom_metrics(op, tree, cube, b, M, wq, p):
    sp = op.space
    inside = _check_ball(sp, tree, cube)
    powers = _power_stack(op, b, 2 * M)
    eps_k, size_k = [], []
    ell = cube.side
    for k, g in enumerate(powers):
        g = np.abs(g)
        peak = float(g.max())
        out = g[~inside]
        eps_k.append(float(out.max()) / peak if (out.size and peak > 0) else 0.0)
        size_k.append(peak / (ell ** (2 * (M - k)) * wq ** (-1.0 / p)))
    a = powers[M]
    l1 = float(np.sum(np.abs(a) * sp.measure))
    cancel = abs(float(np.sum(a * sp.measure))) / l1 if l1 > 0 else 0.0
    return a, eps_k, size_k, cancel


def default_tree_for(op: SelfAdjointOperator, grid: ScaleGrid) -> DyadicCubeTree:
    oct_ = grid.octave
    lo, hi = default_levels(op.space)
    return build_dyadic_cubes(op.space, min(int(oct_.min()), hi), max(int(oct_.max()), hi))


def _octave_fields(op, F, M, pou, grid):
    """Yield (ν, t, w, ψ_M(t√L)F) per octave, finest first; the field has shape (K, S, N)."""
    psi_M = pou.psi.scaled_power(M)
    sq = np.sqrt(op.eigenvalues)
    coef = op.coefficients(F)  # (S, N)
    U = op.eigenvectors
    octaves = grid.octave
    for nu in sorted(set(int(v) for v in octaves), reverse=True):
        ks = np.flatnonzero(octaves == nu)
        t = grid.t[ks]
        mult = psi_M(t[:, None] * sq[None, :])  # (K, N)
        yield nu, t, grid.weights[ks], (coef[None, :, :] * mult[:, None, :]) @ U.T


def cube_coefficients(op: SelfAdjointOperator, F, M: int = 2, p: float = 2.0, w: Weight | None = None,
                      pou: PartitionOfUnity | None = None, grid: ScaleGrid | None = None,
                      tree: DyadicCubeTree | None = None) -> tuple[dict, DyadicCubeTree]:
    """s_Q for a stack of fields: {ν: (cube ids, (S, n_ν) array)} and the tree used."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    w = w if w is not None else constant_weight(op.space)
    pou = pou if pou is not None else make_partition_of_unity()
    grid = grid if grid is not None else ScaleGrid.for_operator(op, 32)
    tree = tree if tree is not None else default_tree_for(op, grid)
    out = {}
    for nu, t, wk, H in _octave_fields(op, F, M, pou, grid):
        A = np.tensordot(wk, np.abs(H), axes=1)  # (S, N)
        cubes = tree.level_cubes(nu)
        s = np.stack([w.mass(c.members) ** (1.0 / p) * A[:, c.members].max(axis=1) for c in cubes], axis=1)
        out[nu] = ([c.id for c in cubes], s)
    return out, tree


def sequence_norms(coeffs: dict, tree: DyadicCubeTree, alpha: float, p: float, q: float,
                   w: Weight) -> tuple[np.ndarray, np.ndarray]:
    """Besov and Triebel-Lizorkin sequence norms of {s_Q}, vectorized over a leading sample axis."""
    if not coeffs:
        return np.zeros(1), np.zeros(1)
    n = tree.space.n_points
    inner_b, layers = [], []
    for nu in sorted(coeffs):
        ids, s = coeffs[nu]
        s = np.abs(np.atleast_2d(s))
        inner_b.append(2.0 ** (nu * alpha) * (s.max(axis=1) if math.isinf(p) else np.sum(s ** p, axis=1) ** (1.0 / p)))
        g = np.zeros((s.shape[0], n))
        for j, cid in enumerate(ids):
            mem = tree.cubes[cid].members
            g[:, mem] += (w.mass(mem) ** (-1.0 / p) * s[:, j])[:, None]
        layers.append(2.0 ** (nu * alpha) * g)
    B = np.array(inner_b)  # (levels, S)
    L = np.array(layers)  # (levels, S, N)
    if math.isinf(q):
        besov, col = B.max(axis=0), L.max(axis=0)
    else:
        besov, col = np.sum(B ** q, axis=0) ** (1.0 / q), np.sum(L ** q, axis=0) ** (1.0 / q)
    tl = col.max(axis=1) if math.isinf(p) else np.sum(col ** p * w.density, axis=1) ** (1.0 / p)
    return besov, tl


def atomic_decompose(op: SelfAdjointOperator, f, M: int = 2, p: float = 2.0, w: Weight | None = None,
                     pou: PartitionOfUnity | None = None, phi: SpectralProfile | None = None,
                     tree: DyadicCubeTree | None = None, grid: ScaleGrid | None = None,
                     *, kernel_tol: float = 1e-10, truncate: bool = False) -> Decomposition:
    """Build the atoms and coefficients of ``f`` (which must be orthogonal to ker L).

    With ``truncate`` each b_Q is cut to the ball 3B_Q shrunk by 2M stencil hops, so
    L^k b_Q lies inside 3B_Q exactly for k <= 2M; what is cut shows up in the
    reconstruction residual.
    """
    if M < 1 or int(M) != M:
        raise AtomError("M must be a positive integer")
    M = int(M)
    f = np.asarray(f, dtype=np.float64)
    nf = float(np.linalg.norm(f))
    if nf > 0 and np.linalg.norm(op.project_kernel(f)) > kernel_tol * nf:
        raise AtomError("input has a component in ker L; project it off first")
    sp = op.space
    w = w if w is not None else constant_weight(sp)
    pou = pou if pou is not None else make_partition_of_unity()
    phi = phi if phi is not None else make_compact_phi()
    grid = grid if grid is not None else ScaleGrid.for_operator(op, 32)
    integral = calderon_pair_constant(pou, phi)
    if abs(integral) <= 1e-3:
        raise AtomError(f"degenerate normalization: ∫ψΦ dξ/ξ = {integral:.3e}")
    c = 1.0 / integral
    tree = tree if tree is not None else default_tree_for(op, grid)
    octaves = grid.octave
    missing = sorted(set(int(v) for v in octaves) - set(tree.levels))
    if missing:
        raise AtomError(f"cube tree lacks levels {missing} needed by the scale grid")
    reach = op.stencil_reach
    params = {"M": M, "p": p, "truncate": truncate, "weight": w.descriptor, "grid": grid.to_dict(), "phi": phi.describe(),
              "pou": pou.psi.describe()}
    if nf == 0:
        return Decomposition([], [], params, c, tree, w, f)

    sq = np.sqrt(op.eigenvalues)
    U = op.eigenvectors
    mu = sp.measure
    per_level = {}
    s_max = 0.0
    for nu, t, wk, H in _octave_fields(op, f[None, :], M, pou, grid):
        H = H[:, 0, :]
        A = wk @ np.abs(H)
        s = {cube.id: w.mass(cube.members) ** (1.0 / p) * float(A[cube.members].max()) for cube in tree.level_cubes(nu)}
        s_max = max(s_max, max(s.values()))
        per_level[nu] = (t, wk, H, s)
    levels = list(per_level)
    atoms, skipped = [], []
    for nu in levels:
        t, wk, H, s = per_level[nu]
        phi_mult = (wk * t ** (2 * M))[:, None] * phi(t[:, None] * sq[None, :])  # (K, N_eig)
        for cube in tree.level_cubes(nu):
            s_q = s[cube.id]
            if s_q <= ZERO_RTOL * s_max:
                skipped.append(cube.id)
                continue
            X = np.zeros_like(H)
            X[:, cube.members] = H[:, cube.members]
            cb = ((X * mu) @ U) * phi_mult  # coefficients of each piece after Φ
            b = cb.sum(axis=0) @ U.T / s_q
            if truncate:
                keep = sp.ball(cube.center, tree.ball_radius(cube, 3.0) - 2 * M * reach)
                b = np.where(keep, b, 0.0)
                if not keep.any():
                    skipped.append(cube.id)
                    continue
            a, eps_k, size_k, cancel = _atom_metrics(op, tree, cube, b, M, w.mass(cube.members), p)
            atoms.append(Atom(cube.id, nu, cube.center, M, s_q, b, a, max(eps_k), eps_k, size_k, cancel))
    atoms.sort(key=lambda a: a.cube_id)
    skipped.sort()
    return Decomposition(atoms, skipped, params, c, tree, w, f)


def reconstruct(op: SelfAdjointOperator, dec: Decomposition):
    """(f_hat, relative L² residual) with f_hat = c Σ s_Q a_Q."""
    n = op.n
    f_hat = np.zeros(n)
    for a in dec.atoms:
        f_hat += a.s_coeff * a.a
    f_hat *= dec.norm_const
    if dec.source is None:
        return f_hat, math.nan
    nf = float(np.linalg.norm(dec.source))
    if nf == 0:
        return f_hat, float(np.linalg.norm(f_hat))
    return f_hat, float(np.linalg.norm(f_hat - dec.source) / nf)


def coefficient_norms(dec: Decomposition, alpha: float = 0.0, p: float | None = None, q: float = 2.0,
                      w: Weight | None = None) -> tuple[float, float]:
    """Besov and Triebel-Lizorkin sequence norms of the coefficients {s_Q}."""
    p = dec.params["p"] if p is None else p
    w = dec.weight if w is None else w
    if not dec.atoms:
        return 0.0, 0.0
    coeffs: dict[int, tuple[list, list]] = {}
    for a in dec.atoms:
        ids, s = coeffs.setdefault(a.level, ([], []))
        ids.append(a.cube_id)
        s.append(a.s_coeff)
    coeffs = {nu: (ids, np.array([s])) for nu, (ids, s) in coeffs.items()}
    b, f = sequence_norms(coeffs, dec.tree, alpha, p, q, w)
    return float(b[0]), float(f[0])


def coefficient_bound_check(op: SelfAdjointOperator, alpha: float = 0.0, p: float = 2.0, q: float = 2.0,
                            w: Weight | None = None, M: int = 2, samples: int = 100, seed: int = 7, *,
                            band: int | None = None, baseline: dict | None = None, fields=None):
    """Coefficient sequence norms of the decomposition over the matching space norms of f."""
    from .equivalence import CaseResult, EquivalenceReport
    from .norms import NormParams, besov_norm, triebel_norm
    from .sampling import DEFAULT_BAND, random_fields

    band = DEFAULT_BAND if band is None else band
    F = random_fields(op, samples, seed, band) if fields is None else np.atleast_2d(fields)
    w = w if w is not None else constant_weight(op.space)
    coeffs, tree = cube_coefficients(op, F, M, p, w)
    cb, cf = sequence_norms(coeffs, tree, alpha, p, q, w)
    params = NormParams(alpha=alpha, p=p, q=q, weight=w)
    rep = EquivalenceReport("coefficient-bound", {"alpha": alpha, "p": p, "q": q, "M": M, "seed": seed,
                                                  "band": band}, int(F.shape[0]))
    prm = {"alpha": alpha, "p": p, "q": q, "M": M}
    rep.cases.append(CaseResult("B", prm, cb / np.asarray(besov_norm(op, F, params).value)))
    if not math.isinf(p):
        rep.cases.append(CaseResult("F", prm, cf / np.asarray(triebel_norm(op, F, params).value)))
    return rep.gate(baseline)


# ---------------------------------------------------------------- synthesis


def synthesis_threshold(n: float, qw: float, alpha: float, p: float, q: float) -> float:
    """Lower bound on M above which atom sums are controlled: n/2 + ½ max{α, n q_w/(1∧p∧q) − α}."""
    r = min(1.0, p, q)
    return n / 2.0 + 0.5 * max(alpha, n * qw / r - alpha)


def synthesis_bound_check(op: SelfAdjointOperator, alpha: float = 0.0, p: float = 2.0, q: float = 2.0,
                          w: Weight | None = None, M: int = 2, samples: int = 50, seed: int = 7, *,
                          tree: DyadicCubeTree | None = None, atoms_per_sample: int = 8,
                          baseline: dict | None = None):
    """‖Σ s_Q a_Q‖ over the coefficient norm for random decompositions of admissible atoms.

    Atoms are a_Q = L^M b_Q with b_Q a compact bump about x_Q (see ``_synthetic_atom``);
    only cubes that leave room for such a bump are used.
    Coefficients are i.i.d. normal. Refuses to run when M does not exceed the synthesis
    threshold.
    """
    from .equivalence import CaseResult, EquivalenceReport
    from .norms import NormParams, besov_norm, critical_index, homogeneous_dimension, triebel_norm

    sp = op.space
    w = w if w is not None else constant_weight(sp)
    n = homogeneous_dimension(sp)
    qw = critical_index(sp, w)
    thr = synthesis_threshold(n, qw, alpha, p, q)
    if not M > thr:
        raise AtomError(f"M = {M} does not exceed the synthesis threshold {thr:.4g}; no bound to test")
    if tree is None:
        lo, hi = default_levels(sp)
        tree = build_dyadic_cubes(sp, lo, hi)
    rng = np.random.default_rng(seed)
    cubes = tree.cubes
    params = NormParams(alpha=alpha, p=p, q=q, weight=w)
    pool_all = [_synthetic_atom(op, tree, c, M, w, p) for c in cubes]
    admissible = [i for i, x in enumerate(pool_all) if x is not None and max(x[2]) <= EPS_SUPPORT]
    if not admissible:
        raise AtomError("no cube admits an atom with the required ε-support")
    F = np.zeros((samples, sp.n_points))
    coeff_b, coeff_f = np.zeros(samples), np.zeros(samples)
    for i in range(samples):
        pick = rng.choice(admissible, size=min(atoms_per_sample, len(admissible)), replace=False)
        s = rng.standard_normal(pick.size)
        atoms = []
        for idx, sv in zip(pick, s):
            b, a, eps_k, size_k, cancel = pool_all[idx]
            cube = cubes[idx]
            atoms.append(Atom(cube.id, cube.level, cube.center, M, float(sv), b, a, max(eps_k), eps_k,
                              size_k, cancel))
            F[i] += sv * a
        dec = Decomposition(atoms, [], {"M": M, "p": p}, 1.0, tree, w)
        coeff_b[i], coeff_f[i] = coefficient_norms(dec, alpha, p, q, w)
    F = op.project_positive(F)
    rep = EquivalenceReport("synthesis-bound", {"alpha": alpha, "p": p, "q": q, "M": M, "threshold": thr,
                                                "seed": seed, "atoms_per_sample": atoms_per_sample}, samples)
    rep.cases.append(CaseResult("B", {"alpha": alpha, "p": p, "q": q, "M": M},
                                np.asarray(besov_norm(op, F, params).value) / coeff_b))
    if not math.isinf(p):
        rep.cases.append(CaseResult("F", {"alpha": alpha, "p": p, "q": q, "M": M},
                                    np.asarray(triebel_norm(op, F, params).value) / coeff_f))
    rep.notes["admissible_cubes"] = len(admissible)
    rep.notes["total_cubes"] = len(cubes)
    rep.notes["max_support_eps"] = max(max(pool_all[i][2]) for i in admissible)
    return rep.gate(baseline)


def _synthetic_atom(op, tree, cube, M, w, p):
    """Compact bump (1 - (d/R)²)₊^{2M+1} about x_Q, R = radius of 3B_Q less 2M stencil hops.

    L^k b then lies inside 3B_Q for k <= 2M. The bump is scaled so every size
    constant is 1 at most. Returns ``None`` when R leaves no room.
    """
    R = tree.ball_radius(cube, 3.0) - 2 * M * op.stencil_reach
    if R <= 0:
        return None
    d = op.space.dist[cube.center]
    b = np.clip(1.0 - (d / R) ** 2, 0.0, None) ** (2 * M + 1)
    wq = w.mass(cube.members)
    a, eps_k, size_k, cancel = _atom_metrics(op, tree, cube, b, M, wq, p)
    scale = max(size_k)
    return b / scale, a / scale, eps_k, [v / scale for v in size_k], cancel


# ---------------------------------------------------------------- classical atoms


@dataclass
class ClassicalAtomReport:
    ran: bool
    diagnostic: str
    support_eps: float = math.nan
    sup_const: float = math.nan
    holder_const: float = math.nan
    cancellation: float = math.nan
    delta0: float = math.nan
    passed: bool = False

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("ran", "diagnostic", "support_eps", "sup_const", "holder_const",
                                              "cancellation", "delta0", "passed")}


def classical_atom_check(op: SelfAdjointOperator, atom: Atom, tree: DyadicCubeTree, delta0: float,
                         conservation_defect: float, w: Weight | None = None, p: float = 2.0, *,
                         conservation_tol: float = 1e-8, eps_supp: float = EPS_SUPPORT) -> ClassicalAtomReport:
    """Test an atom against the four conditions of a (p, w, δ₀) classical atom.

    The sup and Hölder conditions are reported as constants (sup|a| w(Q)^{1/p} and the
    largest |a(x)-a(y)| w(Q)^{1/p} (2^{-ν}/d(x,y))^{δ₀} over pairs in 3B_Q); support and
    cancellation are pass/fail. The check is skipped unless conservation and a positive
    Hölder exponent were established.
    """
    if not conservation_defect <= conservation_tol:
        return ClassicalAtomReport(False, f"conservation defect {conservation_defect:.2e} exceeds {conservation_tol:g}")
    if not delta0 > 0:
        return ClassicalAtomReport(False, "no positive Hölder exponent fitted")
    sp = op.space
    w = w if w is not None else constant_weight(sp)
    cube = tree.cubes[atom.cube_id]
    wq = w.mass(cube.members)
    a = atom.a
    inside = _check_ball(sp, tree, cube)
    A = np.abs(a)
    peak = float(A.max())
    supp = float(A[~inside].max()) / peak if (peak > 0 and (~inside).any()) else 0.0
    sup_c = peak * wq ** (1.0 / p)
    idx = np.flatnonzero(inside)
    D = sp.dist[np.ix_(idx, idx)]
    diff = np.abs(a[idx][:, None] - a[idx][None, :])
    pos = D > 0
    hold = float((diff[pos] * wq ** (1.0 / p) * (cube.side / D[pos]) ** delta0).max()) if pos.any() else 0.0
    l1 = float(np.sum(A * sp.measure))
    cancel = abs(float(np.sum(a * sp.measure))) / l1 if l1 > 0 else 0.0
    ok = supp <= eps_supp and cancel <= CANCEL_TOL
    return ClassicalAtomReport(True, "", supp, sup_c, hold, cancel, delta0, ok)
