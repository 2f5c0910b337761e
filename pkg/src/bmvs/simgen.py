"""Generators for the four simulation settings with known truth."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import DataSet
from .errors import ParameterError
from .randdist import RngStream, SpdMatrix

__all__ = ["SimSpec", "SimTruth", "ar1_cov", "generate", "SETTING_DEFAULTS"]

# q, |t|, coefficient range, AR parameter of X (None = independent), AR parameter of Sigma_Y
SETTING_DEFAULTS = {
    1: dict(q=5, true_size=10, beta_range=(1.0, 3.0), x_rho=None, rho=0.5),
    2: dict(q=30, true_size=10, beta_range=(1.0, 3.0), x_rho=None, rho=0.5),
    3: dict(q=5, true_size=10, beta_range=(0.5, 0.8), x_rho=0.5, rho=0.5),
    4: dict(q=5, true_size=20, beta_range=(1.0, 3.0), x_rho=None, rho=None),
}
RHO_RANGE_S4 = (0.2, 0.8)


def ar1_cov(dim, rho):
    """AR(1) correlation matrix with entries ``rho^|j-k|``."""
    if dim < 1:
        raise ParameterError(f"dim must be positive, got {dim}")
    if not abs(rho) < 1:
        raise ParameterError(f"AR(1) parameter must satisfy |rho| < 1, got {rho}")
    idx = np.arange(dim)
    return SpdMatrix(float(rho) ** np.abs(idx[:, None] - idx[None, :]))


@dataclass(frozen=True)
class SimSpec:
    setting: int = 1
    n: int = 200
    p: int = 500
    q: Optional[int] = None
    seed: int = 0
    true_size: Optional[int] = None
    beta_range: Optional[Tuple[float, float]] = None
    rho: Optional[float] = None

    def __post_init__(self):
        if self.setting not in SETTING_DEFAULTS:
            raise ParameterError(f"setting must be one of 1-4, got {self.setting}")
        for name in ("n", "p"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be positive")
        if self.n < 2:
            raise ParameterError("n must be at least 2")
        if self.q is not None and self.q < 1:
            raise ParameterError("q must be positive")
        if self.resolved("true_size") > self.p:
            raise ParameterError(f"true model size {self.resolved('true_size')} exceeds p = {self.p}")
        lo, hi = self.resolved("beta_range")
        if not lo <= hi:
            raise ParameterError("beta_range must be (low, high) with low <= high")
        if self.rho is not None and not abs(self.rho) < 1:
            raise ParameterError("rho must satisfy |rho| < 1")

    def resolved(self, name):
        val = getattr(self, name)
        return SETTING_DEFAULTS[self.setting][name] if val is None else val


@dataclass(frozen=True)
class SimTruth:
    true_model: Tuple[int, ...]
    beta_true: np.ndarray
    sigma_y_true: SpdMatrix
    rho: float


def _ar1_rows(gen, n, p, rho):
    # rows of N_p(0, AR1(rho)) via the stationary recursion
    e = gen.standard_normal((n, p))
    x = np.empty_like(e)
    x[:, 0] = e[:, 0]
    c = np.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        x[:, j] = rho * x[:, j - 1] + c * e[:, j]
    return x


def generate(spec):
    """Draw ``(DataSet, SimTruth)``; the first ``|t|`` predictors are active.

    Draw order within the stream: X, coefficients, (Setting 4) rho, errors.
    """
    gen = RngStream(spec.seed, 0).gen
    n, p = spec.n, spec.p
    q = spec.resolved("q")
    size = spec.resolved("true_size")
    lo, hi = spec.resolved("beta_range")
    x_rho = SETTING_DEFAULTS[spec.setting]["x_rho"]

    X = gen.standard_normal((n, p)) if x_rho is None else _ar1_rows(gen, n, p, x_rho)
    beta = np.zeros((p, q))
    beta[:size] = gen.uniform(lo, hi, size=(size, q))
    if spec.rho is not None:
        rho = float(spec.rho)
    elif spec.setting == 4:
        rho = float(gen.uniform(*RHO_RANGE_S4))
    else:
        rho = SETTING_DEFAULTS[spec.setting]["rho"]
    sigma = ar1_cov(q, rho)
    E = gen.standard_normal((n, q)) @ sigma.chol.T
    Y = X @ beta + E
    truth = SimTruth(tuple(range(size)), beta, sigma, rho)
    return DataSet(X, Y), truth
