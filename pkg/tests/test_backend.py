import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsl import _kernels_py as py

cy = pytest.importorskip("fsl._kernels")


@given(st.integers(1, 3), st.integers(1, 3), st.integers(2, 12), st.floats(0.5, 6.0), st.integers(0, 2 ** 31))
@settings(max_examples=40, deadline=None)
def test_peetre_backends_agree(T, S, N, lam, seed):
    rng = np.random.default_rng(seed)
    G = np.abs(rng.standard_normal((T, S, N)))
    pts = rng.random((N, 2))
    dist = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    ts = rng.uniform(0.05, 1.0, T)
    assert np.allclose(cy.peetre_max(G, dist, ts, lam), py.peetre_max(G, dist, ts, lam), rtol=1e-14, atol=0)


def test_ball_sup_backends_agree(sp2):
    indptr, indices = sp2.balls.csr
    rng = np.random.default_rng(0)
    avg = rng.random((3, indptr.size - 1))
    a = cy.ball_sup(avg, indptr, indices, sp2.n_points)
    b = py.ball_sup(avg, indptr, indices, sp2.n_points)
    assert np.array_equal(a, b)


def test_env_forces_fallback():
    code = "import fsl.kernels as k; print(k.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env={"FSL_PURE_PYTHON": "1", "PATH": ""},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    out = subprocess.run([sys.executable, "-c", code], env={"PATH": ""}, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "cython"
