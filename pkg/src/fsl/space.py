"""Finite metric measure spaces, ball geometry, doubling diagnostics and dyadic cubes."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

# relative slack used whenever a strict inequality d < r is tested
_REL_TOL = 1e-10


def _lt(d, r):
    """Strict ``d < r`` robust to last-bit noise in distances."""
    return d < r * (1.0 - _REL_TOL)


@dataclass(frozen=True)
class BallSet:
    """Every ball of a finite space, as (center, radius, member mask) triples.

    ``centers``/``radii`` enumerate all pairs ``(x, r)`` with ``r`` ranging over
    the distinct positive distances, plus ``r = inf`` for the whole space. The
    ``unique`` index selects one representative per distinct member set, keeping
    the largest radius among its representations.
    """

    centers: np.ndarray
    radii: np.ndarray
    members: np.ndarray  # (n_balls, N) bool
    mass: np.ndarray
    unique: np.ndarray

    def __len__(self) -> int:
        return len(self.radii)

    @cached_property
    def indicator(self) -> np.ndarray:
        return self.members.astype(np.float64)

    @cached_property
    def unique_members(self) -> np.ndarray:
        return self.members[self.unique]

    @cached_property
    def unique_indicator(self) -> np.ndarray:
        return self.indicator[self.unique]

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) of the unique ball member lists."""
        m = self.unique_members
        counts = m.sum(axis=1)
        indptr = np.zeros(len(m) + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        indices = np.nonzero(m)[1].astype(np.int64)
        return indptr, indices


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """Finite point set with a quasi-distance and a positive measure.

    Parameters
    ----------
    dist : (N, N) array
        Symmetric quasi-distance matrix with zero diagonal.
    measure : (N,) array
        Strictly positive point masses.
    quasi_const : float
        Constant ``K >= 1`` of the quasi-triangle inequality.
    meta : dict
        Construction descriptor (used by config round trips and reports).
    """

    dist: np.ndarray
    measure: np.ndarray
    quasi_const: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=np.float64)
        mu = np.asarray(self.measure, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("dist must be a square matrix")
        if mu.shape != (d.shape[0],):
            raise ValueError("measure length does not match dist")
        if np.any(mu <= 0):
            raise ValueError("measure must be strictly positive")
        if np.any(np.diag(d) != 0) or np.any(d < 0) or not np.array_equal(d, d.T):
            raise ValueError("dist must be symmetric, nonnegative, zero on the diagonal")
        if self.quasi_const < 1:
            raise ValueError("quasi_const must be >= 1")
        d.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "measure", mu)

    @property
    def n_points(self) -> int:
        return self.measure.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.measure.sum())

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max())

    @cached_property
    def min_distance(self) -> float:
        pos = self.dist[self.dist > 0]
        return float(pos.min()) if pos.size else 0.0

    @cached_property
    def distance_values(self) -> np.ndarray:
        """Sorted distinct positive distances (merged up to relative 1e-10)."""
        vals = np.unique(self.dist[self.dist > 0])
        if vals.size == 0:
            return vals
        keep = [vals[0]]
        for v in vals[1:]:
            if v > keep[-1] * (1 + 1e-9):
                keep.append(v)
        return np.array(keep)

    def quasi_triangle_defect(self) -> float:
        """max over (x,y,z) of d(x,y) - K(d(x,z)+d(z,y)); <= 0 when valid."""
        d = self.dist
        worst = -np.inf
        for z in range(self.n_points):
            s = d[:, z][:, None] + d[z, :][None, :]
            worst = max(worst, float((d - self.quasi_const * s).max()))
        return worst

    def ball(self, x: int, r: float) -> np.ndarray:
        """Boolean mask of B(x, r) = {y : d(x, y) < r}."""
        return _lt(self.dist[x], r)

    @cached_property
    def _sorted(self):
        order = np.argsort(self.dist, axis=1, kind="stable")
        ds = np.take_along_axis(self.dist, order, axis=1)
        cm = np.cumsum(self.measure[order], axis=1)
        return ds, cm

    def volume(self, x, r) -> np.ndarray:
        """V(x, r) for arrays of centers and radii (broadcast)."""
        x = np.asarray(x)
        r = np.asarray(r, dtype=np.float64)
        x, r = np.broadcast_arrays(x, r)
        ds, cm = self._sorted
        out = np.empty(x.shape, dtype=np.float64)
        flat_x, flat_r, flat_o = x.ravel(), r.ravel(), out.reshape(-1)
        thr = flat_r * (1.0 - _REL_TOL)
        for i in range(flat_x.size):
            k = np.searchsorted(ds[flat_x[i]], thr[i], side="left")
            flat_o[i] = cm[flat_x[i], k - 1] if k > 0 else 0.0
        return out

    def volumes(self, r: float) -> np.ndarray:
        """V(x, r) for every x."""
        return self.ball_matrix(r) @ self.measure

    def ball_matrix(self, r: float) -> np.ndarray:
        """Row x is the indicator of B(x, r)."""
        if math.isinf(r):
            return np.ones_like(self.dist)
        return _lt(self.dist, r).astype(np.float64)

    def volume_min(self, r: float) -> np.ndarray:
        """Matrix of V(x∧y, r) = min(V(x,r), V(y,r))."""
        v = self.volumes(r)
        return np.minimum(v[:, None], v[None, :])

    def volume_max(self, r: float) -> np.ndarray:
        """Matrix of V(x∨y, r) = max(V(x,r), V(y,r))."""
        v = self.volumes(r)
        return np.maximum(v[:, None], v[None, :])

    @cached_property
    def balls(self) -> BallSet:
        n = self.n_points
        radii = list(self.distance_values) + [math.inf]
        centers, rads, rows = [], [], []
        for r in radii:
            m = np.ones((n, n), dtype=bool) if math.isinf(r) else _lt(self.dist, r)
            for x in range(n):
                centers.append(x)
                rads.append(r)
                rows.append(m[x])
        members = np.array(rows, dtype=bool)
        centers = np.array(centers, dtype=np.int64)
        rads = np.array(rads, dtype=np.float64)
        # one representative per member set, largest radius wins
        best: dict[bytes, int] = {}
        for i in range(len(rads)):
            key = np.packbits(members[i]).tobytes()
            j = best.get(key)
            if j is None or rads[i] > rads[j]:
                best[key] = i
        unique = np.array(sorted(best.values()), dtype=np.int64)
        mass = members.astype(np.float64) @ self.measure
        for a in (members, centers, rads, mass, unique):
            a.setflags(write=False)
        return BallSet(centers, rads, members, mass, unique)

    def is_connected(self) -> bool:
        return bool(np.all(np.isfinite(self.dist)))


# ---------------------------------------------------------------- builders


def build_grid_space(dim: int, side: int, spacing: float, boundary: str = "periodic") -> MetricMeasureSpace:
    """Lattice ``side**dim`` with path (L1) distance times ``spacing``.

    ``boundary`` is ``"periodic"`` (torus wrap) or ``"dirichlet-geometry"``
    (plain box, no wrap). Points are numbered in C order.
    """
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2")
    if side < 4:
        raise ValueError("side must be >= 4")
    if not spacing > 0 or not math.isfinite(spacing):
        raise ValueError("spacing must be positive and finite")
    if boundary not in ("periodic", "dirichlet-geometry"):
        raise ValueError(f"unknown boundary {boundary!r}")
    extent = side * spacing * dim
    if not math.isfinite(extent) or extent > 1e150:
        raise ValueError("side*spacing overflows")
    idx = np.indices((side,) * dim).reshape(dim, -1).T
    steps = np.zeros((len(idx), len(idx)), dtype=np.int64)
    for k in range(dim):
        diff = np.abs(idx[:, k][:, None] - idx[:, k][None, :])
        if boundary == "periodic":
            diff = np.minimum(diff, side - diff)
        steps += diff
    dist = steps * float(spacing)
    mu = np.full(len(idx), float(spacing) ** dim)
    meta = {"type": "grid", "dim": dim, "side": side, "spacing": float(spacing), "boundary": boundary}
    return MetricMeasureSpace(dist, mu, 1.0, meta)


def grid_coordinates(space: MetricMeasureSpace) -> np.ndarray:
    """Integer lattice coordinates of a grid space (C order)."""
    m = space.meta
    return np.indices((m["side"],) * m["dim"]).reshape(m["dim"], -1).T


def build_graph_space(n: int, edges, measure=None) -> MetricMeasureSpace:
    """Weighted graph with shortest-path distance.

    ``edges`` is an iterable of ``(i, j, length)``; ``measure`` defaults to 1.
    """
    import heapq

    adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for i, j, ln in edges:
        i, j, ln = int(i), int(j), float(ln)
        if not ln > 0:
            raise ValueError("edge lengths must be positive")
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"bad edge ({i}, {j})")
        adj[i].append((j, ln))
        adj[j].append((i, ln))
    dist = np.full((n, n), np.inf)
    for s in range(n):
        dist[s, s] = 0.0
        heap = [(0.0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[s, u]:
                continue
            for v, ln in adj[u]:
                nd = d + ln
                if nd < dist[s, v]:
                    dist[s, v] = nd
                    heapq.heappush(heap, (nd, v))
    if not np.all(np.isfinite(dist)):
        raise ValueError("graph is not connected")
    dist = np.minimum(dist, dist.T)
    mu = np.ones(n) if measure is None else np.asarray(measure, dtype=np.float64)
    meta = {"type": "graph", "n": n, "edges": [[int(i), int(j), float(ln)] for i, j, ln in edges],
            "measure": [float(v) for v in mu]}
    return MetricMeasureSpace(dist, mu, 1.0, meta)


def bfs_lattice_distance(side: int, dim: int, periodic: bool, a, b) -> int:
    """Hop count between two lattice sites by breadth-first search."""
    start, goal = tuple(a), tuple(b)
    seen = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        if u == goal:
            return seen[u]
        for k in range(dim):
            for step in (-1, 1):
                v = list(u)
                v[k] += step
                if periodic:
                    v[k] %= side
                elif not 0 <= v[k] < side:
                    continue
                v = tuple(v)
                if v not in seen:
                    seen[v] = seen[u] + 1
                    queue.append(v)
    raise ValueError("unreachable")


# ---------------------------------------------------------------- doubling


@dataclass(frozen=True)
class DoublingReport:
    n_exp: float
    n_tilde: float
    c_doubling: float
    c_growth: float
    growth: dict

    def to_dict(self) -> dict:
        return {"n_exp": self.n_exp, "n_tilde": self.n_tilde, "c_doubling": self.c_doubling,
                "c_growth": self.c_growth, "growth": self.growth}


def estimate_doubling(space: MetricMeasureSpace, lambdas=(2.0, 4.0, 8.0)) -> DoublingReport:
    """Exhaustive doubling diagnostics.

    For each dilation ``lam`` the worst growth ``G(lam) = max V(x, lam r)/V(x, r)``
    is taken over all centers and all radii in the distance set. ``n_exp`` is the
    least-squares slope of ``log G`` against ``log lam``; ``c_growth`` is the
    smallest C with ``G(lam) <= C lam**n_exp`` for all sampled ``lam``.
    ``n_tilde`` is the smallest exponent with
    ``V(x, r) <= (1 + d(x,y)/r)**n_tilde V(y, r)``, capped at ``n_exp``.
    """
    radii = space.distance_values
    n = space.n_points
    if radii.size == 0:
        return DoublingReport(0.0, 0.0, 1.0, 1.0, {str(float(l)): 1.0 for l in lambdas})
    xs = np.arange(n)
    base = space.volume(xs[:, None], radii[None, :])
    growth = {}
    for lam in lambdas:
        big = space.volume(xs[:, None], lam * radii[None, :])
        growth[lam] = float((big / base).max())
    ll = np.log(np.array(lambdas, dtype=np.float64))
    lg = np.log(np.array([growth[l] for l in lambdas]))
    if np.allclose(lg, 0.0):
        n_exp = 0.0
    else:
        A = np.vstack([ll, np.ones_like(ll)]).T
        n_exp = max(float(np.linalg.lstsq(A, lg, rcond=None)[0][0]), 0.0)
    c_growth = float(max(growth[l] / l ** n_exp for l in lambdas))
    dbl = space.volume(xs[:, None], 2 * radii[None, :])
    c_doubling = float((dbl / base).max())

    # cross-center exponent
    n_tilde = 0.0
    d = space.dist
    for k, r in enumerate(radii):
        v = base[:, k]
        ratio = v[:, None] / v[None, :]
        mask = (ratio > 1.0 + 1e-12) & (d > 0)
        if mask.any():
            e = np.log(ratio[mask]) / np.log1p(d[mask] / r)
            n_tilde = max(n_tilde, float(e.max()))
    n_tilde = min(n_tilde, n_exp)
    return DoublingReport(n_exp, n_tilde, c_doubling, c_growth, {str(float(l)): g for l, g in growth.items()})


# ---------------------------------------------------------------- dyadic cubes


@dataclass(frozen=True)
class Cube:
    id: int
    level: int
    center: int
    members: np.ndarray  # sorted point indices
    parent: int | None

    @property
    def side(self) -> float:
        return 2.0 ** (-self.level)


@dataclass(frozen=True, eq=False)
class DyadicCubeTree:
    """Christ-type cube hierarchy with measured sandwich constants."""

    space: MetricMeasureSpace
    levels: tuple[int, ...]
    cubes: tuple[Cube, ...]
    by_level: dict
    labels: dict  # level -> (N,) cube id of each point
    c0: float
    kappa0: float

    def level_cubes(self, nu: int) -> list[Cube]:
        return [self.cubes[i] for i in self.by_level[nu]]

    def ball_radius(self, cube: Cube, factor: float = 1.0) -> float:
        """Radius of ``factor * B_Q``."""
        return factor * self.kappa0 * cube.side

    def nesting_violations(self) -> int:
        bad = 0
        for c in self.cubes:
            if c.parent is None:
                continue
            parent = self.cubes[c.parent]
            bad += int(np.setdiff1d(c.members, parent.members).size)
        return bad

    def to_dict(self) -> dict:
        return {
            "c0": self.c0,
            "kappa0": self.kappa0,
            "levels": {
                str(nu): [
                    {"id": c.id, "center": c.center, "parent": c.parent, "members": c.members.tolist()}
                    for c in self.level_cubes(nu)
                ]
                for nu in self.levels
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _greedy_net(dist: np.ndarray, delta: float, seed_net: list[int]) -> list[int]:
    net = list(seed_net)
    n = dist.shape[0]
    if net:
        closest = dist[net].min(axis=0)
    else:
        closest = np.full(n, np.inf)
    for x in range(n):
        if not _lt(closest[x], delta):
            net.append(x)
            closest = np.minimum(closest, dist[x])
    return net


def build_dyadic_cubes(space: MetricMeasureSpace, nu_min: int, nu_max: int) -> DyadicCubeTree:
    """Nested nearest-net partitions at scales ``2**-nu`` for ``nu_min..nu_max``."""
    if nu_max < nu_min:
        raise ValueError("empty level range")
    if 2.0 ** (-nu_min) < space.diameter / 2 * (1 - 1e-12):
        raise ValueError("coarsest scale 2^-nu_min must be >= diameter/2")
    if space.n_points > 1 and 2.0 ** (-nu_max) > space.min_distance * (1 + 1e-12):
        raise ValueError("finest scale 2^-nu_max must be <= the minimal distance")
    d = space.dist
    n = space.n_points
    cubes: list[Cube] = []
    by_level: dict[int, list[int]] = {}
    labels: dict[int, np.ndarray] = {}
    net: list[int] = []
    parent_label = None
    for nu in range(nu_min, nu_max + 1):
        delta = 2.0 ** (-nu)
        net = _greedy_net(d, delta, net)
        net_arr = np.array(sorted(net), dtype=np.int64)
        assign = np.empty(n, dtype=np.int64)
        for y in range(n):
            cand = net_arr
            if parent_label is not None:
                cand = cand[parent_label[cand] == parent_label[y]]
            dy = d[y, cand]
            best = np.flatnonzero(dy == dy.min())
            assign[y] = cand[best[0]]  # lowest point index among ties
        ids = []
        lab = np.empty(n, dtype=np.int64)
        for center in np.unique(assign):
            members = np.flatnonzero(assign == center)
            cid = len(cubes)
            parent = None if parent_label is None else int(parent_label[center])
            cubes.append(Cube(cid, nu, int(center), members, parent))
            lab[members] = cid
            ids.append(cid)
        by_level[nu] = ids
        labels[nu] = lab
        parent_label = lab
    # sandwich constants
    kappa0 = 0.0
    c0 = math.inf
    for c in cubes:
        dc = d[c.center]
        kappa0 = max(kappa0, float(dc[c.members].max()) / c.side)
        outside = np.setdiff1d(np.arange(n), c.members)
        if outside.size:
            c0 = min(c0, float(dc[outside].min()) / c.side)
    # strict containment in the open ball B(x_Q, kappa0 2^-nu); singleton levels need some room
    kappa0 = max(kappa0 * (1 + 1e-9), 1e-9) if kappa0 > 0 else 0.5
    if not math.isfinite(c0):
        c0 = 1.0
    return DyadicCubeTree(space, tuple(range(nu_min, nu_max + 1)), tuple(cubes), by_level, labels, c0, kappa0)


def default_levels(space: MetricMeasureSpace) -> tuple[int, int]:
    """Coarsest and finest admissible dyadic levels."""
    nu_min = math.floor(-math.log2(max(space.diameter / 2, 1e-300)))
    nu_max = math.ceil(-math.log2(space.min_distance)) if space.n_points > 1 else nu_min
    return nu_min, max(nu_max, nu_min)
