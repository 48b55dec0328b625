import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsl.operator import build_laplacian, gaussian_bound_fit, heat_apply, heat_kernel, wave_support_profile
from fsl.space import build_graph_space, build_grid_space


def test_periodic_eigenvalues_closed_form(op1):
    N, h = 64, 1 / 64
    exact = np.sort((4 / h ** 2) * np.sin(np.pi * np.arange(N) / N) ** 2)
    assert np.allclose(op1.eigenvalues, exact, rtol=1e-12, atol=1e-8)


def test_2d_eigenvalues_are_sums(op2):
    N, h = 16, 1 / 16
    one = (4 / h ** 2) * np.sin(np.pi * np.arange(N) / N) ** 2
    exact = np.sort((one[:, None] + one[None, :]).ravel())
    assert np.allclose(op2.eigenvalues, exact, rtol=1e-11, atol=1e-8)


def test_self_adjoint_and_kernel(op1, sp1):
    S = sp1.measure[:, None] * op1.matrix
    assert np.allclose(S, S.T)
    assert op1.kernel_dim == 1
    assert np.allclose(op1.apply(np.ones(64)), 0.0)


def test_eigenvectors_orthonormal_in_measure(op2, sp2):
    U = op2.eigenvectors
    assert np.allclose(U.T @ (sp2.measure[:, None] * U), np.eye(sp2.n_points), atol=1e-10)


@given(st.floats(1e-4, 0.05), st.floats(1e-4, 0.05))
@settings(max_examples=20, deadline=None)
def test_heat_semigroup(t, s):
    sp = build_grid_space(1, 32, 1 / 32)
    op = build_laplacian(sp)
    P = heat_kernel(op, t)
    Q = heat_kernel(op, s)
    R = heat_kernel(op, t + s)
    assert np.allclose((P * sp.measure) @ Q, R, rtol=1e-9, atol=1e-9 * R.max())


def test_heat_conserves_mass(op1, sp1):
    P = heat_kernel(op1, 0.01)
    assert np.allclose(sp1.measure @ P, 1.0, atol=1e-12)
    f = np.random.default_rng(0).standard_normal(64)
    assert np.sum(heat_apply(op1, 0.01, f) * sp1.measure) == pytest.approx(np.sum(f * sp1.measure))


def test_gaussian_fit_1d(op1):
    h = 1 / 64
    ts = [4 * h * h * 2.0 ** k for k in range(8)]
    rep = gaussian_bound_fit(op1, ts)
    assert rep.success and rep.C < 10
    assert rep.conservation_defect < 1e-12
    assert rep.holder_delta0 > 0


def test_gaussian_fit_window(op1):
    with pytest.raises(ValueError):
        gaussian_bound_fit(op1, [10.0])


def test_wave_support(op1):
    prof = wave_support_profile(op1, 16 / 64)
    assert prof["residual_beyond_2t"] <= 1e-3


def test_graph_laplacian_unit_speed():
    sp = build_graph_space(3, [[0, 1, 0.5], [1, 2, 0.5]], [1.0, 1.0, 1.0])
    op = build_laplacian(sp, "graph")
    assert np.allclose(op.apply(np.ones(3)), 0.0)
    assert op.eigenvalues.max() == pytest.approx(12.0)


def test_bad_normalization(sp1):
    with pytest.raises(ValueError):
        build_laplacian(sp1, normalization="weird")
