"""Randomized norm-equivalence harness.

Each named check compares two norm functionals on the same seeded stack of
band-limited fields and summarizes the ratio ``normA / normB`` per case.
Gating is against stored baselines (see :mod:`fsl.baseline`): a case passes
when its ratio interval sits inside the stored one widened by ``DRIFT`` and
its spread max/min does not exceed the stored spread by more than ``DRIFT``.
Without a baseline a case passes when every ratio is finite and positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .calculus import heat_profile, make_partition_of_unity, sm_profile
from .norms import (
    NormParams,
    besov_norm,
    critical_index,
    homogeneous_dimension,
    f_infinity_norm,
    bmo_l_norm,
    hardy_norm,
    lp_norm_positive,
    parseval_band,
    peetre_threshold,
    sobolev_norm,
    triebel_norm,
    g_function,
    lusin_function,
)
from .operator import SelfAdjointOperator
from .sampling import DEFAULT_BAND, random_fields
from .weights import Weight, constant_weight, power_weight

DRIFT = 0.10
CHECKS = (
    "two-partitions", "dyadic-vs-continuous", "peetre-vs-plain", "sm-characterization",
    "heat-characterization", "lp-identity", "hardy-identity", "bmo-identity", "sobolev-identity",
    "hardy-sobolev-identity", "change-of-angle", "f-infinity-chars", "square-functions",
)


def _stats(r: np.ndarray) -> dict:
    r = np.asarray(r, dtype=np.float64)
    lo, hi = float(r.min()), float(r.max())
    return {"min": lo, "max": hi, "median": float(np.median(r)), "spread": hi / lo if lo > 0 else math.inf}


@dataclass
class CaseResult:
    label: str
    params: dict
    ratios: np.ndarray
    extra_gate: tuple | None = None  # (name, lo, hi): ratios must sit in [lo, hi]
    max_spread: float | None = None
    baseline: dict | None = None
    passed: bool = False
    reason: str = ""

    @property
    def stats(self) -> dict:
        return _stats(self.ratios)

    def gate(self, baseline: dict | None) -> None:
        s = self.stats
        self.baseline = baseline
        ok = bool(np.all(np.isfinite(self.ratios)) and np.all(self.ratios > 0))
        why = [] if ok else ["non-finite or non-positive ratio"]
        if self.extra_gate is not None:
            name, lo, hi = self.extra_gate
            tol = 1e-12
            if not (s["min"] >= lo * (1 - tol) and s["max"] <= hi * (1 + tol)):
                ok = False
                why.append(f"{name} [{lo:.6g}, {hi:.6g}] violated")
        if self.max_spread is not None and not s["spread"] <= self.max_spread:
            ok = False
            why.append(f"spread {s['spread']:.6g} above {self.max_spread:g}")
        if baseline is not None:
            if s["min"] < baseline["min"] / (1 + DRIFT) or s["max"] > baseline["max"] * (1 + DRIFT):
                ok = False
                why.append(f"ratios [{s['min']:.6g}, {s['max']:.6g}] outside baseline "
                           f"[{baseline['min']:.6g}, {baseline['max']:.6g}] ±{DRIFT:.0%}")
            if s["spread"] > baseline["spread"] * (1 + DRIFT):
                ok = False
                why.append(f"spread {s['spread']:.6g} exceeds baseline {baseline['spread']:.6g}")
        self.passed = ok
        self.reason = "; ".join(why)

    def to_dict(self) -> dict:
        d = {"label": self.label, "params": self.params, "ratios": self.stats, "baseline": self.baseline,
             "pass": self.passed}
        if self.extra_gate is not None:
            d["extra_gate"] = {"name": self.extra_gate[0], "lo": self.extra_gate[1], "hi": self.extra_gate[2]}
        if self.max_spread is not None:
            d["max_spread"] = self.max_spread
        if self.reason:
            d["reason"] = self.reason
        return d


@dataclass
class EquivalenceReport:
    check: str
    params: dict
    samples: int
    cases: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def ratios(self) -> dict:
        allr = np.concatenate([c.ratios for c in self.cases])
        s = _stats(allr)
        return {"min": s["min"], "max": s["max"], "median": s["median"]}

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    @property
    def baseline(self) -> dict:
        return {c.label: c.baseline for c in self.cases}

    def case(self, label: str) -> CaseResult:
        for c in self.cases:
            if c.label == label:
                return c
        raise KeyError(label)

    def gate(self, baselines: dict | None) -> "EquivalenceReport":
        baselines = baselines or {}
        for c in self.cases:
            c.gate(baselines.get(c.label))
        return self

    def baseline_records(self) -> dict:
        """Per-case {min, max, spread} suitable for storing as a new baseline."""
        out = {}
        for c in self.cases:
            s = c.stats
            out[c.label] = {"min": s["min"], "max": s["max"], "spread": s["spread"]}
        return out

    def to_dict(self) -> dict:
        return {"check": self.check, "params": self.params, "samples": self.samples, "ratios": self.ratios,
                "baseline": self.baseline, "pass": self.passed, "cases": [c.to_dict() for c in self.cases],
                "notes": self.notes}


# ---------------------------------------------------------------- check bodies


def _v(x) -> np.ndarray:
    return np.asarray(x.value if hasattr(x, "value") else x, dtype=np.float64)


def _weights(op, names) -> dict[str, Weight]:
    sp = op.space
    table = {"unit": lambda: constant_weight(sp), "power": lambda: power_weight(sp, 0, 0.5)}
    return {n: table[n]() for n in names}


def _two_partitions(op, F, W, alpha=0.3):
    p1, p3 = make_partition_of_unity(1.0), make_partition_of_unity(3.0)
    for wn, w in W.items():
        base = NormParams(alpha=alpha, p=2.0, q=2.0, weight=w)
        yield (f"F:{wn}", {"alpha": alpha, "p": 2, "q": 2, "weight": wn, "sharpness": [1, 3]},
               _v(triebel_norm(op, F, base.with_(pou=p1))) / _v(triebel_norm(op, F, base.with_(pou=p3))), None)
        yield (f"B:{wn}", {"alpha": alpha, "p": 2, "q": 2, "weight": wn, "sharpness": [1, 3]},
               _v(besov_norm(op, F, base.with_(pou=p1))) / _v(besov_norm(op, F, base.with_(pou=p3))), None)


def _flavor_pair(op, F, W, fa, fb, alpha=0.3):
    for wn, w in W.items():
        base = NormParams(alpha=alpha, p=2.0, q=2.0, weight=w)
        prm = {"alpha": alpha, "p": 2, "q": 2, "weight": wn, "flavors": [fa, fb]}
        yield (f"F:{wn}", prm, _v(triebel_norm(op, F, base.with_(flavor=fa))) /
               _v(triebel_norm(op, F, base.with_(flavor=fb))), None)
        yield (f"B:{wn}", prm, _v(besov_norm(op, F, base.with_(flavor=fa))) /
               _v(besov_norm(op, F, base.with_(flavor=fb))), None)


def _profile_char(op, F, W, profile, alpha=0.3):
    G = op.project_positive(F)
    for wn, w in W.items():
        base = NormParams(alpha=alpha, p=2.0, q=2.0, weight=w)
        prm = {"alpha": alpha, "p": 2, "q": 2, "weight": wn, "profile": profile.describe()}
        cont = base.with_(flavor="continuous", profile=profile)
        yield (f"F:{wn}", prm, _v(triebel_norm(op, G, cont)) / _v(triebel_norm(op, G, base)), None)
        yield (f"B:{wn}", prm, _v(besov_norm(op, G, cont)) / _v(besov_norm(op, G, base)), None)


def _lp_identity(op, F, W, ps=(1.5, 2.0, 3.0)):
    for wn, w in W.items():
        for p in ps:
            r = _v(triebel_norm(op, F, NormParams(alpha=0.0, p=p, q=2.0, weight=w))) / _v(
                lp_norm_positive(op, F, p, w))
            extra = ("parseval", *parseval_band(op)) if (p == 2.0 and wn == "unit") else None
            yield (f"p={p:g}:{wn}", {"alpha": 0, "q": 2, "p": p, "weight": wn}, r, extra)


def _hardy_identity(op, F, W, ps=(0.7, 1.0)):
    for wn, w in W.items():
        for p in ps:
            r = _v(hardy_norm(op, F, p, w)) / _v(triebel_norm(op, F, NormParams(alpha=0.0, p=p, q=2.0, weight=w)))
            yield (f"p={p:g}:{wn}", {"alpha": 0, "q": 2, "p": p, "weight": wn}, r, None)


def _bmo_identity(op, F, W):
    G = op.project_positive(F)
    for wn, w in W.items():
        r = _v(bmo_l_norm(op, G, w)) / _v(f_infinity_norm(op, G, 0.0, 2.0, w, "dyadic"))
        yield (f"{wn}", {"alpha": 0, "q": 2, "weight": wn}, r, None)


def _sobolev_identity(op, F, W, ss=(-1.0, 1.0, 2.0)):
    for wn, w in W.items():
        for s in ss:
            r = _v(sobolev_norm(op, F, s, 2.0, w)) / _v(
                triebel_norm(op, F, NormParams(alpha=s, p=2.0, q=2.0, weight=w)))
            yield (f"s={s:g}:{wn}", {"s": s, "p": 2, "q": 2, "weight": wn}, r, None)


def _hardy_sobolev_identity(op, F, W, ss=(-1.0, 1.0), ps=(0.7, 1.0)):
    from .apps import fractional_power

    for s in ss:
        Ls = fractional_power(op, F, s, check=False)
        for wn, w in W.items():
            for p in ps:
                r = _v(hardy_norm(op, Ls, p, w)) / _v(triebel_norm(op, F, NormParams(alpha=s, p=p, q=2.0, weight=w)))
                yield (f"s={s:g},p={p:g}:{wn}", {"s": s, "p": p, "q": 2, "weight": wn}, r, None)


def _change_of_angle(op, F, W, apertures=(1.0, 2.0, 4.0), alpha=0.3):
    """‖𝒮_a‖/‖𝒮_1‖ must lie in [1, (1+DRIFT) a^{r n/(p∧q)}], r = 1 for the unit weight, q_w otherwise."""
    n = homogeneous_dimension(op.space)
    for wn, w in W.items():
        r = critical_index(op.space, w)
        expo = r * n / 2.0
        base = NormParams(alpha=alpha, p=2.0, q=2.0, weight=w, flavor="lusin")
        ref = _v(triebel_norm(op, F, base))
        for a in apertures:
            ratio = _v(triebel_norm(op, F, base.with_(aperture=a))) / ref
            yield (f"a={a:g}:{wn}", {"alpha": alpha, "p": 2, "q": 2, "weight": wn, "aperture": a, "exponent": expo},
                   ratio, ("aperture-growth", 1.0, (1 + DRIFT) * a ** expo))


def _f_infinity(op, F, W):
    for wn, w in W.items():
        ref = _v(f_infinity_norm(op, F, 0.0, 2.0, w, "dyadic"))
        for fl in ("continuous", "peetre"):
            r = _v(f_infinity_norm(op, F, 0.0, 2.0, w, fl)) / ref
            yield (f"{fl}:{wn}", {"alpha": 0, "q": 2, "weight": wn, "flavor": fl}, r, None)


def _square_functions(op, F, W, alpha=0.3):
    from .calculus import ScaleGrid, spectral_stack

    pou = make_partition_of_unity()
    grid = ScaleGrid.for_profile(op, pou.psi, 16)
    fields = spectral_stack(op, pou.psi, grid.t, F)
    for wn, w in W.items():
        lam = peetre_threshold(op.space, w, 2.0, 2.0) + 1.0
        base = NormParams(alpha=alpha, p=2.0, q=2.0, weight=w, grid=grid)
        dy = _v(triebel_norm(op, F, base))
        gf = _v(triebel_norm(op, F, base.with_(flavor="g-function", lambda_exp=lam)))
        ls = _v(triebel_norm(op, F, base.with_(flavor="lusin")))
        prm = {"alpha": alpha, "p": 2, "q": 2, "weight": wn, "lambda": lam}
        yield (f"g/dyadic:{wn}", prm, gf / dy, None)
        yield (f"lusin/dyadic:{wn}", prm, ls / dy, None)
        # pointwise comparison: 𝒮_1 <= 2^λ 𝒢_λ
        S = lusin_function(op, grid, fields, alpha, 2.0)
        G = g_function(op, grid, fields, alpha, 2.0, lam)
        with np.errstate(invalid="ignore", divide="ignore"):
            pw = np.where(G > 0, S / G, 0.0).max(axis=1)
        yield (f"pointwise-lusin/g:{wn}", prm, np.maximum(pw, 1e-300), ("lusin<=2^lambda*g", 0.0, 2.0 ** lam))


_CHECKS: dict[str, Callable] = {
    "two-partitions": _two_partitions,
    "dyadic-vs-continuous": lambda op, F, W: _flavor_pair(op, F, W, "continuous", "dyadic"),
    "peetre-vs-plain": lambda op, F, W: _flavor_pair(op, F, W, "peetre", "continuous"),
    "sm-characterization": lambda op, F, W: _profile_char(op, F, W, sm_profile(1, "sech")),
    "heat-characterization": lambda op, F, W: _profile_char(op, F, W, heat_profile(1)),
    "lp-identity": _lp_identity,
    "hardy-identity": _hardy_identity,
    "bmo-identity": _bmo_identity,
    "sobolev-identity": _sobolev_identity,
    "hardy-sobolev-identity": _hardy_sobolev_identity,
    "change-of-angle": _change_of_angle,
    "f-infinity-chars": _f_infinity,
    "square-functions": _square_functions,
}


def _growth_notes(report: EquivalenceReport) -> None:
    report.notes["growth"] = {c.label: {"exponent": c.params["exponent"],
                                        "C_a": c.stats["max"] / c.params["aperture"] ** c.params["exponent"]}
                              for c in report.cases}


def equivalence_suite(op: SelfAdjointOperator, check: str, *, samples: int = 100, seed: int = 7,
                      band: int = DEFAULT_BAND, weights=("unit", "power"), baseline: dict | None = None,
                      fields: np.ndarray | None = None) -> EquivalenceReport:
    """Run one named equivalence check over ``samples`` seeded random fields."""
    if check not in _CHECKS:
        raise ValueError(f"unknown equivalence check {check!r}; known: {', '.join(CHECKS)}")
    if samples < 1:
        raise ValueError("need at least one sample")
    F = random_fields(op, samples, seed, band) if fields is None else np.atleast_2d(fields)
    W = _weights(op, weights)
    rep = EquivalenceReport(check, {"seed": seed, "band": band, "weights": list(weights),
                                    "n_points": op.n}, int(F.shape[0]))
    for label, prm, ratios, extra in _CHECKS[check](op, F, W):
        rep.cases.append(CaseResult(label, prm, np.asarray(ratios, dtype=np.float64), extra))
    if check == "change-of-angle":
        _growth_notes(rep)
    return rep.gate(baseline)
