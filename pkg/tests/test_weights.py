import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsl.space import build_grid_space
from fsl.weights import (
    ap_constant, constant_weight, critical_indices, explicit_weight, fefferman_stein_check, maximal_function,
    power_weight, rh_constant, weighted_lp_norm,
)

SMALL = build_grid_space(1, 12, 1 / 12)


def ap_bruteforce(sp, w, p):
    """Every (center, radius) ball, no deduplication."""
    best = 0.0
    for x in range(sp.n_points):
        for r in list(np.unique(sp.dist[x])) + [math.inf]:
            m = sp.dist[x] < r if math.isfinite(r) else np.ones(sp.n_points, bool)
            if not m.any():
                continue
            mu = sp.measure[m]
            a = np.sum(w[m] * mu) / mu.sum()
            b = np.sum(w[m] ** (-1 / (p - 1)) * mu) / mu.sum()
            best = max(best, a ** (1 / p) * b ** ((p - 1) / p))
    return best


def maximal_bruteforce(sp, f, r):
    out = np.zeros(sp.n_points)
    for c in range(sp.n_points):
        for rad in list(np.unique(sp.dist[c])) + [math.inf]:
            m = sp.dist[c] < rad if math.isfinite(rad) else np.ones(sp.n_points, bool)
            if not m.any():
                continue
            avg = (np.sum(np.abs(f[m]) ** r * sp.measure[m]) / sp.measure[m].sum()) ** (1 / r)
            out[m] = np.maximum(out[m], avg)
    return out


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_unit_weight_is_exactly_one(sp1, p):
    assert ap_constant(sp1, constant_weight(sp1), p) == 1.0


def test_power_weight_matches_bruteforce():
    w = power_weight(SMALL, 0, 0.5)
    for p in (1.5, 2.0, 4.0):
        assert ap_constant(SMALL, w, p) == pytest.approx(ap_bruteforce(SMALL, w.values, p), rel=1e-12)


def test_power_weight_critical_index(sp1):
    rep = critical_indices(sp1, power_weight(sp1, 0, 0.5))
    assert 1.0 <= rep.qw_est <= 1 + 0.5 / 1.0 + 0.05
    assert math.isfinite(rep.ap_const) and rep.ap_const >= 1.0
    assert rep.ap_curve[0][0] == 1.0


weights = st.lists(st.floats(0.05, 20.0), min_size=12, max_size=12)


@given(weights, st.floats(1.1, 6.0), st.floats(1.1, 6.0))
@settings(max_examples=40, deadline=None)
def test_ap_monotone_in_p(vals, p1, p2):
    w = explicit_weight(SMALL, vals)
    lo, hi = sorted((p1, p2))
    assert ap_constant(SMALL, w, hi) <= ap_constant(SMALL, w, lo) * (1 + 1e-12)


@given(weights, st.floats(1.1, 6.0))
@settings(max_examples=40, deadline=None)
def test_ap_duality(vals, p):
    w = explicit_weight(SMALL, vals)
    pp = p / (p - 1)
    assert ap_constant(SMALL, w.power(1 - pp), pp) == pytest.approx(ap_constant(SMALL, w, p), rel=1e-10)


@given(weights)
@settings(max_examples=30, deadline=None)
def test_ap_at_least_one(vals):
    assert ap_constant(SMALL, explicit_weight(SMALL, vals), 2.0) >= 1 - 1e-12


@given(st.lists(st.floats(-5, 5), min_size=12, max_size=12), st.sampled_from([0.5, 1.0, 2.0]))
@settings(max_examples=30, deadline=None)
def test_maximal_function_bruteforce(vals, r):
    f = np.array(vals)
    assert np.allclose(maximal_function(SMALL, f, r), maximal_bruteforce(SMALL, f, r), rtol=1e-12, atol=1e-14)


def test_maximal_dominates(fields1, sp1):
    Mf = maximal_function(sp1, fields1[:5])
    assert np.all(Mf >= np.abs(fields1[:5]) - 1e-12)


def test_rh_unit_weight(sp1):
    assert rh_constant(sp1, constant_weight(sp1), 2.0) == pytest.approx(1.0)


def test_weighted_norm():
    w = constant_weight(SMALL, 2.0)
    f = np.ones(12)
    assert weighted_lp_norm(f, 2.0, w) == pytest.approx(math.sqrt(2.0))
    assert weighted_lp_norm(-3 * f, math.inf, w) == 3.0


def test_fefferman_stein_stable_across_seeds(op1, sp1):
    from fsl.sampling import random_fields

    for w in (constant_weight(sp1), power_weight(sp1, 0, 0.5)):
        c = [fefferman_stein_check(sp1, random_fields(op1, 8, s), 2.0, 2.0, 1.0, w) for s in range(7, 12)]
        assert min(c) >= 1.0 - 1e-12
        assert max(c) / min(c) <= 2.0


def test_fefferman_stein_domain(sp1):
    with pytest.raises(ValueError):
        fefferman_stein_check(sp1, np.ones((2, 64)), 2.0, 2.0, 2.5, constant_weight(sp1))


def test_weight_validation(sp1):
    with pytest.raises(ValueError):
        explicit_weight(sp1, np.zeros(64))
