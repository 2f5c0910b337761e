"""Seeded random streams and the four samplers the Gibbs sweep needs.

Every stream is a counter-based Philox generator keyed by
``SeedSequence(seed, spawn_key=(stream_id,))`` so that a replicate study can
hand one independent stream to each chain without coordination.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import DecompositionError, ParameterError

__all__ = [
    "RngStream",
    "SpdMatrix",
    "as_spd",
    "cholesky",
    "sample_mvn",
    "sample_inv_wishart",
    "sample_inv_gamma",
]

_UINT64 = (1 << 64) - 1


class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    The wrapped :class:`numpy.random.Generator` is exposed as ``.gen``; the
    stream is single-owner and must not be shared between threads.
    """

    def __init__(self, seed=0, stream_id=0):
        seed = int(seed)
        stream_id = int(stream_id)
        if not (0 <= seed <= _UINT64 and 0 <= stream_id <= _UINT64):
            raise ParameterError("seed and stream_id must be 64-bit unsigned integers")
        self.seed = seed
        self.stream_id = stream_id
        ss = np.random.SeedSequence(seed, spawn_key=(stream_id,))
        self.gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def substream(self, stream_id):
        """A fresh stream sharing this seed but with a different id."""
        return RngStream(self.seed, stream_id)

    # thin pass-throughs used by the engine
    def standard_normal(self, size=None):
        return self.gen.standard_normal(size)

    def random(self, size=None):
        return self.gen.random(size)

    def gamma(self, shape, size=None):
        return self.gen.standard_gamma(shape, size)


def cholesky(a):
    """Lower Cholesky factor without pivoting.

    Raises :class:`DecompositionError` carrying the 0-based index of the
    first non-positive pivot.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DecompositionError(-1, "matrix has non-finite entries")
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise DecompositionError(info - 1)
    if info < 0:  # pragma: no cover - argument error from LAPACK
        raise DecompositionError(-1, f"dpotrf argument {-info} invalid")
    return c


class SpdMatrix:
    """Dense symmetric positive-definite matrix with a lazily cached factor."""

    def __init__(self, entries, check=True):
        a = np.array(entries, dtype=float, copy=True)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ParameterError(f"SpdMatrix needs a square matrix, got shape {a.shape}")
        a.setflags(write=False)
        self.entries = a
        if check:
            self.check()

    @property
    def dim(self):
        return self.entries.shape[0]

    @cached_property
    def chol(self):
        return cholesky(self.entries)

    @cached_property
    def inverse(self):
        linv = solve_triangular(self.chol, np.eye(self.dim), lower=True)
        return linv.T @ linv

    @cached_property
    def logdet(self):
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def check(self):
        a = self.entries
        scale = max(float(np.max(np.abs(a))), np.finfo(float).tiny)
        if np.max(np.abs(a - a.T)) > 1e-12 * scale:
            raise ParameterError("matrix is not symmetric to 1e-12 relative")
        self.chol  # raises DecompositionError on a failed pivot
        return self

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, SpdMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    __hash__ = None

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim})"


def as_spd(a):
    return a if isinstance(a, SpdMatrix) else SpdMatrix(a)


def sample_mvn(mean, cov, rng):
    """Draw ``mean + L z`` with ``L`` the lower Cholesky factor of ``cov``."""
    cov = as_spd(cov)
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (cov.dim,):
        raise ParameterError(f"mean has shape {mean.shape}, covariance is {cov.dim}x{cov.dim}")
    z = rng.standard_normal(cov.dim)
    return mean + cov.chol @ z


def _bartlett_factor(nu, q, rng):
    # lower-triangular A with A A' ~ Wishart(nu, I_q)
    a = np.zeros((q, q))
    for i in range(q):
        a[i, i] = np.sqrt(2.0 * rng.gamma(0.5 * (nu - i)))
    rows, cols = np.tril_indices(q, -1)
    a[rows, cols] = rng.standard_normal(rows.size)
    return a


def sample_inv_wishart(nu, scale, rng):
    """Inverse-Wishart draw with density proportional to
    ``|S|^{-(nu+q+1)/2} exp(-tr(scale S^{-1})/2)``.

    Uses the Bartlett decomposition of ``Wishart(nu, scale^{-1})`` and
    inverts through the triangular factor, so the cost is O(q^3).
    """
    scale = as_spd(scale)
    q = scale.dim
    if not nu > q - 1:
        raise ParameterError(f"inverse-Wishart needs nu > q - 1 = {q - 1}, got nu = {nu}")
    # W = (lw A)(lw A)' with lw lw' = scale^{-1}; sigma = W^{-1}
    lw = cholesky(scale.inverse)
    m = lw @ _bartlett_factor(nu, q, rng)  # W = m m'
    minv = solve_triangular(m, np.eye(q), lower=True)
    sigma = minv.T @ minv
    sigma = 0.5 * (sigma + sigma.T)
    return SpdMatrix(sigma)


def sample_inv_gamma(shape, scale, rng, size=None):
    """Reciprocal of a ``Gamma(shape, rate=scale)`` draw."""
    if not (shape > 0 and scale > 0):
        raise ParameterError(f"inverse-gamma needs shape > 0 and scale > 0, got ({shape}, {scale})")
    return scale / rng.gamma(shape, size)
