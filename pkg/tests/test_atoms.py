import math

import numpy as np
import pytest
from scipy.integrate import quad

from fsl.atoms import (
    AtomError, EPS_SUPPORT, atomic_decompose, calderon_pair_constant, coefficient_bound_check, reconstruct,
    synthesis_bound_check, synthesis_threshold,
)
from fsl.calculus import make_compact_phi, make_partition_of_unity
from fsl.sampling import random_fields
from fsl.weights import power_weight


@pytest.fixture(scope="module")
def dec1(op1):
    return atomic_decompose(op1, random_fields(op1, 1, 7)[0])


def test_calderon_pair_constant_oracle():
    pou, phi = make_partition_of_unity(), make_compact_phi()
    want, _ = quad(lambda x: float(pou.psi(x) * phi(x)) / x, 0.5, 2.0, points=[1.0], epsabs=1e-12, epsrel=1e-12)
    assert calderon_pair_constant(pou, phi) == pytest.approx(want, rel=1e-8)


def test_reconstruction_residual(op1, dec1):
    _, res = reconstruct(op1, dec1)
    assert res <= 1e-6


def test_reconstruction_weighted_2d(op2):
    f = random_fields(op2, 1, 3)[0]
    dec = atomic_decompose(op2, f, w=power_weight(op2.space, 0, 0.5))
    assert reconstruct(op2, dec)[1] <= 1e-6


def test_cancellation_and_moments(op1, dec1):
    assert max(a.cancellation for a in dec1.atoms) <= 1e-10
    for a in dec1.atoms[:10]:
        assert np.allclose(op1.apply(a.b, a.M), a.a, atol=1e-8 * np.abs(a.a).max())


def test_size_constants_finite(dec1):
    sc = dec1.size_constants()
    assert 0 < sc["k<=M"][0] <= sc["k<=M"][1] < math.inf
    assert 0 < sc["k>M"][0] <= sc["k>M"][1] < math.inf


@pytest.mark.xfail(strict=True, reason="untruncated atoms leak beyond 3B_Q at the finest levels")
def test_epsilon_support(dec1):
    assert dec1.max_support_eps <= EPS_SUPPORT


def test_truncated_atoms_are_supported(op1):
    dec = atomic_decompose(op1, random_fields(op1, 1, 7)[0], truncate=True)
    assert dec.max_support_eps == 0.0
    assert dec.params["truncate"] is True


def test_rejects_kernel_component_and_bad_M(op1):
    f = random_fields(op1, 1, 7)[0]
    with pytest.raises(AtomError):
        atomic_decompose(op1, f + 1.0)
    with pytest.raises(AtomError):
        atomic_decompose(op1, f, M=0)


def test_zero_input(op1):
    dec = atomic_decompose(op1, np.zeros(op1.n))
    assert dec.atoms == [] and reconstruct(op1, dec)[1] == 0.0


def test_serialization(dec1):
    d = dec1.to_dict()
    assert d["n_atoms"] == len(dec1.atoms) and "b" not in d["atoms"][0]
    assert len(dec1.to_dict(dense=True)["atoms"][0]["b"]) == 64


def test_synthesis_threshold_formula():
    assert synthesis_threshold(1.0, 1.0, 0.0, 2.0, 2.0) == pytest.approx(1.0)
    assert synthesis_threshold(2.0, 1.5, 0.5, 0.5, 2.0) == pytest.approx(1.0 + 0.5 * (2 * 1.5 / 0.5 - 0.5))
    assert synthesis_threshold(1.0, 1.0, 3.0, 2.0, 2.0) == pytest.approx(2.0)


def test_synthesis_refuses_at_threshold(op1):
    with pytest.raises(AtomError):
        synthesis_bound_check(op1, M=1, samples=2)
    with pytest.raises(AtomError):
        synthesis_bound_check(op1, alpha=4.0, M=2, samples=2)


def test_coefficient_and_synthesis_bounds_run(op1):
    cb = coefficient_bound_check(op1, samples=10)
    assert cb.passed and {c.label for c in cb.cases} == {"B", "F"}
    sb = synthesis_bound_check(op1, M=2, samples=10)
    assert sb.passed and sb.notes["max_support_eps"] <= EPS_SUPPORT
    assert 0 < sb.ratios["max"] < math.inf
