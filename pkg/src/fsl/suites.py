"""Suite orchestration: runs the verification checks and assembles reports.

Every check yields a :class:`Check` whose dict form carries
``{check, params, ratios: {min, max, median}, baseline, pass}`` plus cases
and notes. Tolerance checks compare measured values against a fixed bound;
band checks come from :class:`~fsl.equivalence.EquivalenceReport` and are
gated against the baseline store.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import apps, atoms, calculus
from .baseline import BaselineStore, canonical
from .config import RunConfig
from .equivalence import CHECKS, CaseResult, EquivalenceReport, equivalence_suite
from .norms import (
    NormParams, besov_norm, bmo_l_norm, classical_bmo_norm, critical_index, f_infinity_norm,
    homogeneous_dimension, triebel_norm,
)
from .operator import gaussian_bound_fit, wave_support_profile
from .sampling import random_fields
from .space import build_dyadic_cubes, default_levels, estimate_doubling
from .weights import ap_constant, constant_weight, critical_indices, fefferman_stein_check, power_weight

log = logging.getLogger(__name__)

SUITES = ("space", "weights", "kernel-bounds", "calderon", "norms", "equivalences", "atoms", "apps")
SUITE_CHOICES = ("all",) + SUITES + CHECKS


def _plain(x):
    """JSON-safe copy with numpy scalars and arrays converted."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    return x


def _summary(values) -> dict:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        return {"min": None, "max": None, "median": None}
    return {"min": float(v.min()), "max": float(v.max()), "median": float(np.median(v))}


@dataclass
class Check:
    suite: str
    check: str
    params: dict
    ratios: dict
    passed: bool
    baseline: object = None
    gating: bool = True
    cases: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)
    reason: str = ""

    def to_dict(self) -> dict:
        d = {"suite": self.suite, "check": self.check, "params": self.params, "ratios": self.ratios,
             "baseline": self.baseline, "pass": self.passed, "gating": self.gating}
        if self.cases:
            d["cases"] = self.cases
        if self.notes:
            d["notes"] = self.notes
        if self.reason:
            d["reason"] = self.reason
        return _plain(d)


class Context:
    """Shared fixture state for one run."""

    def __init__(self, cfg: RunConfig, store: BaselineStore | None = None):
        self.cfg = cfg
        self.space, self.op = cfg.build()
        self.store = store if store is not None else BaselineStore(cfg.baseline_dir)
        self.fixture = cfg.fixture
        self.config_hash = cfg.config_hash()
        self._fields = None
        self._tree = None
        self._weights = None

    @property
    def fields(self) -> np.ndarray:
        if self._fields is None:
            self._fields = random_fields(self.op, self.cfg.samples, self.cfg.seed, self.cfg.band)
        return self._fields

    @property
    def weights(self) -> dict:
        if self._weights is None:
            self._weights = {"unit": constant_weight(self.space), "power": power_weight(self.space, 0, 0.5)}
        return self._weights

    @property
    def tree(self):
        if self._tree is None:
            self._tree = build_dyadic_cubes(self.space, *default_levels(self.space))
        return self._tree

    # -- adapters
    def tolerance(self, suite, name, params, values, tol, *, gating=True, notes=None) -> Check:
        v = np.asarray(values, dtype=np.float64).ravel()
        ok = bool(v.size and np.all(np.isfinite(v)) and v.max() <= tol)
        reason = "" if ok else f"max {v.max() if v.size else float('nan'):.6g} exceeds tolerance {tol:g}"
        return Check(suite, name, dict(params, tol=tol), _summary(v), ok, None, gating, notes=notes or {},
                     reason=reason)

    def banded(self, suite, rep: EquivalenceReport, key: str | None = None, *, gating=True) -> Check:
        name = key or rep.check
        params = _plain(rep.params)
        if self.cfg.rebaseline:
            rep.gate(None)
            self.store.append(name, self.fixture, params, rep.baseline_records(), self.config_hash)
        else:
            rep.gate(self.store.bands(name, self.fixture, params))
        cases = [c.to_dict() for c in rep.cases]
        reason = "; ".join(f"{c['label']}: {c['reason']}" for c in cases if c.get("reason"))
        return Check(suite, name, params, rep.ratios, rep.passed, rep.baseline, gating, cases,
                     _plain(rep.notes), reason)


# ---------------------------------------------------------------- suites


def suite_space(ctx: Context) -> list[Check]:
    sp, op = ctx.space, ctx.op
    out = []
    dbl = estimate_doubling(sp)
    rep = EquivalenceReport("doubling", {"lambdas": [2.0, 4.0, 8.0]}, 1)
    rep.cases.append(CaseResult("n_exp", {}, np.array([dbl.n_exp])))
    rep.cases.append(CaseResult("c_doubling", {}, np.array([dbl.c_doubling])))
    rep.notes.update(dbl.to_dict())
    out.append(ctx.banded("space", rep))
    out.append(ctx.tolerance("space", "quasi-triangle", {}, [max(sp.quasi_triangle_defect(), 0.0)], 1e-12))
    out.append(ctx.tolerance("space", "cube-nesting", {"levels": list(ctx.tree.levels)},
                             [ctx.tree.nesting_violations()], 0.0,
                             notes={"kappa0": ctx.tree.kappa0, "c0": ctx.tree.c0}))
    S = sp.measure[:, None] * op.matrix
    out.append(ctx.tolerance("space", "operator-symmetry", {}, [np.abs(S - S.T).max() / np.abs(S).max()], 1e-12))
    out.append(ctx.tolerance("space", "operator-psd", {}, [max(-float(op.eigenvalues.min()), 0.0)], 1e-10))
    h = sp.min_distance
    hi = sp.diameter ** 2
    ts = [4 * h * h * 2.0 ** k for k in range(40) if 4 * h * h * 2.0 ** k <= hi * (1 + 1e-12)]
    ge = gaussian_bound_fit(op, ts)
    rep = EquivalenceReport("gaussian-bound", {"t": ts}, len(ts))
    rep.cases.append(CaseResult("C", {"c": ge.c}, np.array([ge.C])))
    rep.notes.update(ge.to_dict())
    out.append(ctx.banded("space", rep))
    out.append(ctx.tolerance("space", "heat-conservation", {"t": ts}, [ge.conservation_defect], 1e-10))
    wave = wave_support_profile(op, 16 * h)
    out.append(ctx.tolerance("space", "wave-support", {"t": 16 * h}, [wave["residual_beyond_2t"]], 1e-3,
                             gating=False, notes={"drop_at": wave["drop_at"]}))
    return out


def suite_weights(ctx: Context) -> list[Check]:
    sp = ctx.space
    out = []
    unit = ctx.weights["unit"]
    out.append(ctx.tolerance("weights", "ap-unit-weight", {"p": [1.5, 2.0, 3.0]},
                             [abs(ap_constant(sp, unit, p) - 1.0) for p in (1.5, 2.0, 3.0)], 0.0))
    ps = [1.25, 1.5, 2.0, 3.0, 4.0, 8.0]
    mono, dual = [], []
    for name, w in ctx.weights.items():
        A = [ap_constant(sp, w, p) for p in ps]
        mono += [max(A[i + 1] / A[i] - 1.0, 0.0) for i in range(len(A) - 1)]
        for p in (1.5, 2.0, 3.0):
            pp = p / (p - 1)
            lhs = ap_constant(sp, w.power(1 - pp), pp)
            rhs = ap_constant(sp, w, p)  # 1/p-normalized constants are self-dual
            dual.append(abs(lhs - rhs) / rhs)
    out.append(ctx.tolerance("weights", "ap-monotonicity", {"p": ps}, mono, 1e-12))
    out.append(ctx.tolerance("weights", "ap-duality", {"p": [1.5, 2.0, 3.0]}, dual, 1e-10))

    power = ctx.weights["power"]
    apr = critical_indices(sp, power)
    rep = EquivalenceReport("power-weight-constants", {"exponent": 0.5, "p": 2.0}, 1)
    rep.cases.append(CaseResult("A_2", {}, np.array([apr.ap_const])))
    rep.cases.append(CaseResult("q_w", {}, np.array([apr.qw_est])))
    rep.notes.update(apr.to_dict())
    out.append(ctx.banded("weights", rep))

    seeds = [ctx.cfg.seed + k for k in range(5)]
    rep = EquivalenceReport("fefferman-stein", {"p": 2.0, "q": 2.0, "r": 1.0, "seeds": seeds, "family": 8,
                                                "band": ctx.cfg.band}, len(seeds))
    for name, w in ctx.weights.items():
        consts = [fefferman_stein_check(sp, random_fields(ctx.op, 8, s, ctx.cfg.band), 2.0, 2.0, 1.0, w)
                  for s in seeds]
        rep.cases.append(CaseResult(name, {"weight": name}, np.array(consts), max_spread=2.0))
    out.append(ctx.banded("weights", rep))
    return out


def suite_kernel_bounds(ctx: Context) -> list[Check]:
    op = ctx.op
    n = homogeneous_dimension(ctx.space)
    rep = calculus.kernel_bound_sweep(op, n)
    lo = 0.5 / math.sqrt(op.lambda_max)
    hi = 2.0 / math.sqrt(op.lambda_min_pos)
    full = [2.0 ** -k for k in range(-4, 40) if lo < 2.0 ** -k * (1 - 1e-12) and 2.0 ** -k < hi * (1 - 1e-12)]
    wide = calculus.kernel_bound_sweep(op, n, ts=full)
    rep.notes["full_window_spread"] = {c.label: c.stats["spread"] for c in wide.cases}
    rep.notes["full_window_t"] = full
    return [ctx.banded("kernel-bounds", rep)]


def suite_calderon(ctx: Context) -> list[Check]:
    op = ctx.op
    pou = calculus.make_partition_of_unity()
    lam = op.eigenvalues[op.eigenvalues > 0]
    js = pou.j_range(op)
    out = [ctx.tolerance("calderon", "telescoping", {"j": [js.start, js.stop - 1]},
                         [pou.telescoping_error(np.sqrt(lam), js)], 1e-10)]
    grid = calculus.ScaleGrid.for_operator(op, 32)
    F = ctx.fields
    _, res = calculus.calderon_reconstruct(op, pou, grid, F)
    out.append(ctx.tolerance("calderon", "calderon-residual",
                             {"points_per_octave": 32, "samples": int(F.shape[0]), "seed": ctx.cfg.seed},
                             res, 1e-6))
    _, dres = calculus.dyadic_reconstruct(op, pou, F)
    out.append(ctx.tolerance("calderon", "dyadic-reconstruction", {"samples": int(F.shape[0])}, dres, 1e-10))
    return out


def suite_norms(ctx: Context) -> list[Check]:
    op = ctx.op
    F = ctx.fields
    out = []
    fub = []
    for name, w in ctx.weights.items():
        for p in (1.5, 2.0, 3.0):
            prm = NormParams(alpha=0.3, p=p, q=p, weight=w)
            b = np.asarray(besov_norm(op, F, prm).value)
            f = np.asarray(triebel_norm(op, F, prm).value)
            fub.append(np.abs(b - f) / f)
    out.append(ctx.tolerance("norms", "besov-equals-tl-at-p-eq-q", {"alpha": 0.3, "p": [1.5, 2.0, 3.0]},
                             np.concatenate(fub), 1e-10))
    prm = NormParams(alpha=0.3, p=2.0, q=2.0)
    base = np.asarray(triebel_norm(op, F, prm).value)
    hom = np.abs(np.asarray(triebel_norm(op, -2.5 * F, prm).value) - 2.5 * base) / (2.5 * base)
    out.append(ctx.tolerance("norms", "homogeneity", {"c": -2.5}, hom, 1e-12))
    shifted = F + 3.0
    ker = np.abs(np.asarray(besov_norm(op, shifted, prm).value) - np.asarray(besov_norm(op, F, prm).value))
    out.append(ctx.tolerance("norms", "kernel-invariance", {"shift": 3.0},
                             ker / np.asarray(besov_norm(op, F, prm).value), 1e-10))
    # informational: classical mean-oscillation BMO against the F∞ norm
    ratio = (np.asarray(classical_bmo_norm(op, F).value)
             / np.asarray(f_infinity_norm(op, F, 0.0, 2.0).value))
    out.append(Check("norms", "classical-bmo-comparison", {"alpha": 0.0, "q": 2.0}, _summary(ratio),
                     bool(np.all(np.isfinite(ratio))), None, False,
                     notes={"operator_bmo_over_classical": _summary(
                         np.asarray(bmo_l_norm(op, F).value) / np.asarray(classical_bmo_norm(op, F).value))}))
    return out


def suite_equivalences(ctx: Context, checks=CHECKS) -> list[Check]:
    out = []
    for name in checks:
        t0 = time.perf_counter()
        rep = equivalence_suite(ctx.op, name, samples=ctx.cfg.samples, seed=ctx.cfg.seed, band=ctx.cfg.band,
                                fields=ctx.fields)
        log.info("%s: %.2fs", name, time.perf_counter() - t0)
        out.append(ctx.banded("equivalences", rep))
    return out


def suite_atoms(ctx: Context) -> list[Check]:
    op, sp = ctx.op, ctx.space
    F = ctx.fields
    M = 2
    grid = calculus.ScaleGrid.for_operator(op, 32)
    tree = atoms.default_tree_for(op, grid)
    res, eps, cancel, size_lo, size_hi = [], [], [], [], []
    by_level: dict = {}
    first = None
    for f in F:
        dec = atoms.atomic_decompose(op, f, M=M, tree=tree, grid=grid)
        first = first or dec
        res.append(atoms.reconstruct(op, dec)[1])
        for a in dec.atoms:
            eps.append(a.support_eps)
            cancel.append(a.cancellation)
            size_lo.append(a.size_const_low)
            size_hi.append(a.size_const_high)
            by_level[a.level] = max(by_level.get(a.level, 0.0), a.support_eps)
    prm = {"M": M, "p": 2.0, "samples": int(F.shape[0]), "seed": ctx.cfg.seed, "band": ctx.cfg.band}
    out = [ctx.tolerance("atoms", "reconstruct-residual", prm, res, 1e-6),
           ctx.tolerance("atoms", "atom-support", prm, eps, atoms.EPS_SUPPORT,
                         notes={"by_level": {str(k): v for k, v in sorted(by_level.items())},
                                "atoms": len(eps)})]
    # L1 = 0 for every Laplacian built here, so all atoms must integrate to zero
    out.append(ctx.tolerance("atoms", "atom-cancellation", prm, cancel, atoms.CANCEL_TOL))
    rep = EquivalenceReport("atom-size", prm, len(size_lo))
    rep.cases.append(CaseResult("k<=M", {}, np.asarray(size_lo)))
    rep.notes["k>M"] = _summary(size_hi)
    out.append(ctx.banded("atoms", rep))

    n = homogeneous_dimension(sp)
    for name, w in ctx.weights.items():
        rep = atoms.coefficient_bound_check(op, 0.0, 2.0, 2.0, w, M, samples=ctx.cfg.samples, seed=ctx.cfg.seed,
                                            band=ctx.cfg.band, fields=F)
        rep.params["weight"] = name
        out.append(ctx.banded("atoms", rep, f"coefficient-bound:{name}"))
        thr = atoms.synthesis_threshold(n, critical_index(sp, w), 0.0, 2.0, 2.0)
        M_ok = math.floor(thr) + 1
        rep = atoms.synthesis_bound_check(op, 0.0, 2.0, 2.0, w, M_ok, samples=min(ctx.cfg.samples, 50),
                                          seed=ctx.cfg.seed, tree=ctx.tree)
        rep.params["weight"] = name
        out.append(ctx.banded("atoms", rep, f"synthesis-bound:{name}"))
        refused = 0.0
        try:
            atoms.synthesis_bound_check(op, 0.0, 2.0, 2.0, w, math.floor(thr), samples=1, tree=ctx.tree)
            refused = 1.0
        except atoms.AtomError:
            pass
        out.append(ctx.tolerance("atoms", f"synthesis-refusal:{name}",
                                 {"M": math.floor(thr), "threshold": thr}, [refused], 0.0))
    ge = gaussian_bound_fit(op, [4 * sp.min_distance ** 2 * 4 ** k for k in range(3)])
    rows = [atoms.classical_atom_check(op, a, tree, ge.holder_delta0, ge.conservation_defect)
            for a in first.atoms[:16]]
    ran = [r for r in rows if r.ran]
    out.append(Check("atoms", "classical-atoms", {"atoms": len(rows)},
                     _summary([r.holder_const for r in ran]), bool(ran) and all(r.passed for r in ran), None,
                     False, notes={"skipped": [r.diagnostic for r in rows if not r.ran][:1],
                                   "passed": sum(r.passed for r in ran), "ran": len(ran)}))
    return out


def suite_apps(ctx: Context) -> list[Check]:
    op = ctx.op
    F = ctx.fields
    out = []
    lam = op.eigenvalues
    U = op.eigenvectors
    pos = np.flatnonzero(lam > 0)
    errs = []
    for s in (-1.0, 0.5, 1.0, 2.0):
        V = apps.fractional_power(op, U[:, pos].T, s, check=False)
        exp = (lam[pos] ** (s / 2))[:, None] * U[:, pos].T
        errs.append(np.linalg.norm(V - exp, axis=1) / np.linalg.norm(exp, axis=1))
    out.append(ctx.tolerance("apps", "eigenvector-power", {"s": [-1.0, 0.5, 1.0, 2.0]}, np.concatenate(errs), 1e-8))
    route = [apps.integral_route_error(op, F, s) for s in (-1.0, 0.5, 1.0, 1.5, 2.0, 3.0)]
    out.append(ctx.tolerance("apps", "integral-route", {"s": [-1.0, 0.5, 1.0, 1.5, 2.0, 3.0]}, route, 1e-6))
    comp = []
    for a, b in ((1.0, 1.0), (0.5, 1.5), (-1.0, 2.0), (2.0, -1.0), (-0.5, -0.5)):
        lhs = apps.fractional_power(op, apps.fractional_power(op, F, b, check=False), a, check=False)
        rhs = apps.fractional_power(op, F, a + b, check=False)
        comp.append(np.linalg.norm(lhs - rhs, axis=1) / np.linalg.norm(rhs, axis=1))
    out.append(ctx.tolerance("apps", "composition-law", {"pairs": [[1, 1], [0.5, 1.5], [-1, 2], [2, -1],
                                                                    [-0.5, -0.5]]}, np.concatenate(comp), 1e-8))
    one = apps.symbol_from_config({"type": "constant", "value": 1.0})
    G = apps.laplace_type_multiplier(op, one, F)
    half = np.linalg.norm(G - 0.5 * op.project_positive(F), axis=1) / np.linalg.norm(F, axis=1)
    out.append(ctx.tolerance("apps", "unit-multiplier", {"symbol": one.descriptor}, half, 1e-6))
    for s in (-1.0, 1.0, 2.0):
        rep = apps.fractional_boundedness_check(op, s, 0.0, 2.0, 2.0, samples=ctx.cfg.samples, seed=ctx.cfg.seed,
                                                band=ctx.cfg.band, fields=F)
        out.append(ctx.banded("apps", rep, f"fractional-boundedness:s={s:g}"))
    table = {"type": "table", "u": [0.0, 0.01, 0.1, 1.0, 10.0], "m": [1.0, -0.5, 0.8, 0.2, 0.0]}
    for sym in ({"type": "exp", "a": 0.5}, table):
        mprof = apps.symbol_from_config(sym)
        rep = apps.multiplier_boundedness_check(op, mprof, 0.0, 2.0, 2.0, samples=ctx.cfg.samples,
                                                seed=ctx.cfg.seed, band=ctx.cfg.band, fields=F)
        out.append(ctx.banded("apps", rep, f"multiplier-boundedness:{sym['type']}"))
    return out


RUNNERS = {"space": suite_space, "weights": suite_weights, "kernel-bounds": suite_kernel_bounds,
           "calderon": suite_calderon, "norms": suite_norms, "equivalences": suite_equivalences,
           "atoms": suite_atoms, "apps": suite_apps}


def expand(selection) -> list[str]:
    """Suite names in dependency order; single equivalence checks pass through."""
    sel = list(selection) or ["all"]
    if "all" in sel:
        return list(SUITES)
    bad = [s for s in sel if s not in SUITE_CHOICES]
    if bad:
        raise ValueError(f"unknown suite(s): {', '.join(bad)}")
    order = {s: i for i, s in enumerate(SUITES)}
    return sorted(dict.fromkeys(sel), key=lambda s: (order.get(s, order["equivalences"]), s))


def run_suite(cfg: RunConfig, store: BaselineStore | None = None, *, timestamp: str | None = None) -> dict:
    ctx = Context(cfg, store)
    checks: list[Check] = []
    timings = {}
    for name in expand(cfg.suites):
        t0 = time.perf_counter()
        if name in RUNNERS:
            checks += RUNNERS[name](ctx)
        else:
            checks += suite_equivalences(ctx, (name,))
        timings[name] = time.perf_counter() - t0
        log.info("suite %s done in %.1fs", name, timings[name])
    gating = [c for c in checks if c.gating]
    return _plain({
        "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "fixture": ctx.fixture, "seed": cfg.seed, "samples": cfg.samples, "band": cfg.band,
        "config": {"space": cfg.space, "operator": cfg.operator, "suites": expand(cfg.suites)},
        "config_hash": ctx.config_hash, "rebaseline": cfg.rebaseline,
        "pass": all(c.passed for c in gating),
        "failed": [c.check for c in gating if not c.passed],
        "checks": [c.to_dict() for c in checks],
        "_timings": timings,
    })


def dumps_report(report: dict) -> str:
    """Stable JSON text; wall-clock timings are dropped so reruns compare equal."""
    body = {k: v for k, v in report.items() if k != "_timings"}
    return json.dumps(body, indent=1, sort_keys=True, allow_nan=True) + "\n"


CSV_HEADER = ("suite", "check", "case", "params", "min", "max", "median", "pass", "gating")


def _rows(report: dict):
    for c in report.get("checks", []):
        cases = c.get("cases") or [{"label": "", "params": c["params"], "ratios": c["ratios"], "pass": c["pass"]}]
        for case in cases:
            r = case["ratios"]
            yield (c.get("suite", ""), c["check"], case["label"], canonical(case["params"]),
                   repr(r["min"]), repr(r["max"]), repr(r["median"]), str(bool(case["pass"])).lower(),
                   str(bool(c.get("gating", True))).lower())


def emit_plot_data(report: dict) -> str:
    """CSV text: header plus one row per (check, case) with repr floats for exact round-trip."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in _rows(report):
        w.writerow(row)
    return buf.getvalue()


def parse_plot_data(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    for r in rows:
        for k in ("min", "max", "median"):
            r[k] = None if r[k] == "None" else float(r[k])
        r["params"] = json.loads(r["params"])
        r["pass"] = r["pass"] == "true"
        r["gating"] = r["gating"] == "true"
    return rows
