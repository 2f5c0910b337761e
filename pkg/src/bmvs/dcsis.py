"""Distance-correlation sure independence screening.

Each predictor column is scored by its sample distance correlation with the
rows of ``Y``; the top ``d`` columns are kept. Distance correlation is
invariant to shifting and rescaling a column, so raw and standardised ``X``
give the same ranking.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import ParameterError
from .kernels import dcov_columns, double_centered

__all__ = ["ScreenReport", "distance_correlation", "screen", "DEFAULT_SCREEN_SIZE"]

DEFAULT_SCREEN_SIZE = 200


@dataclass(frozen=True)
class ScreenReport:
    """``kept`` lists the retained columns from highest to lowest score."""

    scores: np.ndarray
    kept: tuple
    d: int

    @property
    def kept_sorted(self):
        return tuple(sorted(self.kept))


def _response_centered(Y):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    return double_centered(squareform(pdist(Y)))


def _dcor_from_parts(dcov2, dvar2_x, dvar2_y):
    denom = np.sqrt(dvar2_x * dvar2_y)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(denom > 0, dcov2 / np.where(denom > 0, denom, 1.0), 0.0)
    return np.sqrt(np.clip(r2, 0.0, 1.0))


def _scores(X, Y):
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 3:
        raise ParameterError("distance correlation needs n >= 3")
    if Y.shape[0] != X.shape[0]:
        raise ParameterError(f"x has {X.shape[0]} rows but Y has {Y.shape[0]} rows")
    B = _response_centered(Y)
    dvar2_y = float(np.mean(B * B))
    dcov2, dvar2_x = dcov_columns(X, B)
    # exact zero for constant columns, rounding aside
    const = np.ptp(X, axis=0) == 0
    if np.any(const):
        warnings.warn(f"{int(const.sum())} constant predictor column(s) scored 0", stacklevel=3)
        dvar2_x = np.where(const, 0.0, dvar2_x)
    return _dcor_from_parts(dcov2, dvar2_x, dvar2_y)


def distance_correlation(x, Y):
    """Sample distance correlation between a vector ``x`` and the rows of ``Y``."""
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    return float(_scores(x, Y)[0])


def screen(data, d=DEFAULT_SCREEN_SIZE):
    d = int(d)
    if d < 1 or d > data.p:
        raise ParameterError(f"screen size must be in [1, p = {data.p}], got {d}")
    scores = _scores(data.X, data.Y)
    order = np.lexsort((np.arange(data.p), -scores))
    return ScreenReport(scores, tuple(int(i) for i in order[:d]), d)
