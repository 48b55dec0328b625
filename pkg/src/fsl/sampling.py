"""Seeded random test fields, band-limited away from ker L."""

import numpy as np

from .operator import SelfAdjointOperator

DEFAULT_BAND = 16


def random_fields(op: SelfAdjointOperator, n_samples: int, seed: int, band: int = DEFAULT_BAND,
                  offset: int = 0) -> np.ndarray:
    """(n_samples, N) fields with i.i.d. N(0,1) coefficients on ``band`` eigenvectors.

    The band starts ``offset`` positions above the last kernel eigenvector.
    """
    start = op.kernel_dim + offset
    stop = min(start + band, op.n)
    if stop <= start:
        raise ValueError("empty spectral band")
    rng = np.random.default_rng(seed)
    c = np.zeros((n_samples, op.n))
    c[:, start:stop] = rng.standard_normal((n_samples, stop - start))
    return op.synthesize(c)
