import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsl.calculus import make_partition_of_unity
from fsl.norms import (
    NormParams, besov_norm, bmo_l_norm, classical_bmo_norm, hardy_norm, lp_norm_positive, parseval_band,
    peetre_threshold, sobolev_norm, triebel_norm,
)
from fsl.sampling import random_fields
from fsl.weights import constant_weight, power_weight

POU = make_partition_of_unity()


def _fft_pieces(f, js, n=64):
    """ψ_j(√L) f on the periodic 1D grid through the FFT and the closed-form symbol."""
    h = 1 / n
    sq = np.sqrt((4 / h ** 2) * np.sin(np.pi * np.arange(n) / n) ** 2)
    fh = np.fft.fft(f)
    return np.array([np.fft.ifft(POU.psi(2.0 ** -j * sq) * fh).real for j in js])


@pytest.mark.parametrize("alpha,p,q", [(0.0, 2.0, 2.0), (0.5, 1.5, 3.0), (-0.7, 3.0, 1.0)])
def test_dyadic_norms_against_fft_oracle(op1, sp1, alpha, p, q):
    f = random_fields(op1, 1, 21)[0]
    js = list(POU.j_range(op1))
    pieces = _fft_pieces(f, js)
    w = power_weight(sp1, 0, 0.5)
    dens = w.values * (1 / 64)
    lp = lambda g: np.sum(np.abs(g) ** p * dens) ** (1 / p)
    scale = 2.0 ** (np.array(js) * alpha)
    b = np.sum((scale * np.array([lp(g) for g in pieces])) ** q) ** (1 / q)
    F = lp(np.sum((scale[:, None] * np.abs(pieces)) ** q, axis=0) ** (1 / q))
    prm = NormParams(alpha=alpha, p=p, q=q, weight=w)
    assert besov_norm(op1, f, prm).value == pytest.approx(b, rel=1e-10)
    assert triebel_norm(op1, f, prm).value == pytest.approx(F, rel=1e-10)


@pytest.mark.parametrize("flavor", ["dyadic", "continuous"])
@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_besov_equals_triebel_when_p_equals_q(op2, flavor, p):
    F = random_fields(op2, 5, 4)
    prm = NormParams(alpha=0.4, p=p, q=p, flavor=flavor)
    assert np.allclose(besov_norm(op2, F, prm).value, triebel_norm(op2, F, prm).value, rtol=1e-10)


@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.sampled_from(["dyadic", "continuous", "peetre"]))
@settings(max_examples=20, deadline=None)
def test_homogeneity(c, flavor):
    from fsl.config import operator_from_config, space_from_config

    op = operator_from_config(space_from_config("grid1d"))
    f = random_fields(op, 1, 5)[0]
    prm = NormParams(alpha=0.2, p=1.5, q=2.0, flavor=flavor)
    for fn in (besov_norm, triebel_norm):
        assert fn(op, c * f, prm).value == pytest.approx(abs(c) * fn(op, f, prm).value, rel=1e-12)


@pytest.mark.parametrize("flavor", ["dyadic", "continuous", "peetre", "g-function", "lusin"])
def test_blind_to_kernel(op1, flavor):
    f = random_fields(op1, 1, 8)[0]
    prm = NormParams(alpha=0.3, p=2.0, q=2.0, flavor=flavor)
    a = triebel_norm(op1, f, prm).value
    assert triebel_norm(op1, f + 3.7, prm).value == pytest.approx(a, rel=1e-10)


def test_parseval_band(op1, op2):
    for op in (op1, op2):
        lam = op.eigenvalues[op.eigenvalues > 0]
        # exactly two pieces a, 1-a are active at each eigenvalue: a²+(1-a)² in [1/2, 1]
        lo, hi = parseval_band(op)
        assert 1 / math.sqrt(2) - 1e-12 <= lo <= hi <= 1 + 1e-12
        a = POU.psi(np.sqrt(lam) / 2.0 ** np.floor(np.log2(np.sqrt(lam))))
        want = np.sqrt(a ** 2 + (1 - a) ** 2)
        assert lo == pytest.approx(want.min(), rel=1e-12) and hi == pytest.approx(want.max(), rel=1e-12)


def test_sobolev_zero_is_lp(op2):
    F = random_fields(op2, 4, 2)
    w = power_weight(op2.space, 0, 0.5)
    assert np.allclose(sobolev_norm(op2, F, 0.0, 2.0, w).value, lp_norm_positive(op2, F, 2.0, w).value)


def test_unit_weight_l2_is_parseval(op1):
    f = random_fields(op1, 1, 3)[0]
    c = op1.coefficients(f)
    assert lp_norm_positive(op1, f, 2.0).value == pytest.approx(np.linalg.norm(c), rel=1e-12)


def test_classical_bmo_brute_force(op1, sp1):
    f = random_fields(op1, 1, 6)[0]
    mu, best = sp1.measure, 0.0
    for x in range(sp1.n_points):
        for r in np.unique(sp1.dist[x]):
            m = sp1.dist[x] <= r
            avg = np.sum(f[m] * mu[m]) / mu[m].sum()
            best = max(best, np.sum(np.abs(f[m] - avg) * mu[m]) / mu[m].sum())
    assert classical_bmo_norm(op1, f).value == pytest.approx(best, rel=1e-10)
    assert bmo_l_norm(op1, f).value > 0


def test_peetre_threshold_validation(op1):
    w = constant_weight(op1.space)
    thr = peetre_threshold(op1.space, w, 2.0)
    f = random_fields(op1, 1, 1)[0]
    with pytest.raises(ValueError):
        besov_norm(op1, f, NormParams(flavor="peetre", lambda_exp=thr * 0.9))
    assert besov_norm(op1, f, NormParams(flavor="peetre", lambda_exp=thr * 1.1)).value > 0


def test_argument_errors(op1):
    f = random_fields(op1, 1, 1)[0]
    with pytest.raises(ValueError):
        besov_norm(op1, f, NormParams(flavor="lusin"))
    with pytest.raises(ValueError):
        triebel_norm(op1, f, NormParams(flavor="nope"))
    with pytest.raises(ValueError):
        triebel_norm(op1, f, NormParams(p=math.inf))
    with pytest.raises(ValueError):
        triebel_norm(op1, f, NormParams(flavor="lusin", aperture=0.5))
    with pytest.raises(ValueError):
        hardy_norm(op1, f, 1.5)
