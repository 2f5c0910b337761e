"""Turning inclusion probabilities into a model: ranked AICc path or the
median-probability rule."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import qr

from .errors import CollinearityError, NumericalError, ParameterError
from .randdist import SpdMatrix

__all__ = [
    "ModelIndex",
    "aicc",
    "aicc_fit",
    "rank_predictors",
    "select_by_aicc",
    "select_by_median_probability",
    "default_max_size",
]


@dataclass(frozen=True)
class ModelIndex:
    """A selected model: sorted predictor indices plus its AICc refit.

    ``aicc_path`` holds ``(j, value)`` for each evaluated top-j set, with
    ``value`` ``None`` where the refit was skipped as collinear.
    """

    indices: tuple
    aicc: Optional[float] = None
    residual_cov: Optional[SpdMatrix] = None
    rule: str = "aicc"
    aicc_path: list = field(default_factory=list)

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ParameterError("model indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    @property
    def size(self):
        return len(self.indices)

    def mask(self, p):
        out = np.zeros(p, dtype=bool)
        out[list(self.indices)] = True
        return out


def default_max_size(n, q):
    return max(0, min(50, n - q - 2))


def _design(X, model):
    return np.column_stack([np.ones(X.shape[0]), X[:, list(model)]])


def _check_rank(Z, model):
    _, r, piv = qr(Z, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(Z.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < Z.shape[1]:
        labels = ["intercept"] + [int(i) for i in model]
        raise CollinearityError([labels[j] for j in sorted(piv[rank:])])


def aicc_fit(data, model):
    """Least-squares refit of ``Y`` on an intercept plus ``model``.

    Returns ``(aicc, residual_cov)`` with the 1/n residual covariance.
    """
    model = [int(i) for i in model]
    n, q = data.n, data.q
    size = len(model)
    if size >= n - q - 1:
        raise ParameterError(f"model size {size} must be below n - q - 1 = {n - q - 1}")
    if len(set(model)) != size or any(i < 0 or i >= data.p for i in model):
        raise ParameterError("model indices must be distinct and within range")
    Z = _design(data.X, model)
    _check_rank(Z, model)
    coef, *_ = np.linalg.lstsq(Z, data.Y, rcond=None)
    E = data.Y - Z @ coef
    cov = E.T @ E / n
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0 or not np.isfinite(logdet):
        raise NumericalError(f"residual covariance is singular for a model of size {size}")
    d = n / (n - (size + q + 1))
    return float(n * logdet + d * q * (n + size)), SpdMatrix(0.5 * (cov + cov.T), check=False)


def aicc(data, model):
    """``n log|S| + d q (n + |model|)`` with ``d = n / (n - |model| - q - 1)``."""
    return aicc_fit(data, model)[0]


def _probs(result):
    probs = getattr(result, "inclusion_prob", result)
    return np.asarray(probs, dtype=float)


def rank_predictors(probs):
    """Indices by decreasing probability, ties to the smaller index."""
    probs = np.asarray(probs, dtype=float)
    return np.lexsort((np.arange(probs.size), -probs))


def select_by_aicc(result, data, max_size=None):
    """Minimise AICc along the nested top-j path, j = 0..max_size."""
    probs = _probs(result)
    if probs.shape != (data.p,):
        raise ParameterError(f"expected {data.p} inclusion probabilities, got {probs.shape}")
    if max_size is None:
        max_size = default_max_size(data.n, data.q)
    max_size = min(int(max_size), data.p)
    if max_size < 0 or max_size >= data.n - data.q - 1:
        raise ParameterError(f"max_size must lie in [0, n - q - 2], got {max_size}")
    order = rank_predictors(probs)
    best = None
    path = []
    for j in range(max_size + 1):
        model = order[:j]
        try:
            value, cov = aicc_fit(data, model)
        except CollinearityError as exc:
            warnings.warn(f"skipping top-{j} set: {exc}", stacklevel=2)
            path.append((j, None))
            continue
        path.append((j, value))
        if best is None or value < best[0]:
            best = (value, cov, model)
    if best is None:
        raise NumericalError("no model on the AICc path could be fitted")
    value, cov, model = best
    return ModelIndex(tuple(sorted(int(i) for i in model)), value, cov, "aicc", path)


def select_by_median_probability(result, data=None):
    """Predictors with inclusion probability at least 1/2.

    When ``data`` is given and the model is small enough, the AICc of the
    refit is filled in.
    """
    probs = _probs(result)
    model = tuple(int(i) for i in np.flatnonzero(probs >= 0.5))
    value = cov = None
    if data is not None and len(model) < data.n - data.q - 1:
        try:
            value, cov = aicc_fit(data, model)
        except CollinearityError as exc:
            warnings.warn(f"median-probability model is collinear: {exc}", stacklevel=2)
    return ModelIndex(model, value, cov, "median")
