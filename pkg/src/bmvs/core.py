"""Model containers, prior hyperparameters and the full conditionals.

The functions here are the readable reference form of each conditional.
The Gibbs engine uses the fused kernels in :mod:`bmvs.kernels`, and the
test-suite checks that both agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .errors import DataError, NumericalError, ParameterError, ZeroVarianceError
from .randdist import SpdMatrix, as_spd, cholesky

__all__ = [
    "DataSet",
    "HyperParams",
    "ChainState",
    "compute_tau",
    "calibrate_phi",
    "beta_conditional",
    "sigma_beta_conditional",
    "z_conditional",
    "z_log_odds",
    "sigma_y_conditional",
]


@dataclass(frozen=True)
class DataSet:
    """Predictors ``X`` (n x p) and responses ``Y`` (n x q), rows are observations."""

    X: np.ndarray
    Y: np.ndarray
    x_names: Optional[Sequence[str]] = None
    y_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or Y.ndim != 2:
            raise DataError("X and Y must be 2-d")
        if X.shape[0] != Y.shape[0]:
            raise DataError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]} rows")
        if X.shape[0] < 2:
            raise DataError("need at least two observations")
        if X.shape[1] < 1 or Y.shape[1] < 1:
            raise DataError("X and Y need at least one column each")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise DataError("X and Y must not contain NaN or infinite values")
        for names, width, label in ((self.x_names, X.shape[1], "x_names"), (self.y_names, Y.shape[1], "y_names")):
            if names is not None and len(names) != width:
                raise DataError(f"{label} has {len(names)} entries, expected {width}")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def q(self):
        return self.Y.shape[1]

    def subset(self, columns):
        """Dataset restricted to the given predictor columns."""
        columns = list(columns)
        names = None if self.x_names is None else [self.x_names[j] for j in columns]
        return DataSet(self.X[:, columns], self.Y, names, self.y_names)


def compute_tau(data):
    """Spike and slab variances ``(tau0_sq, tau1_sq)`` scaled by the mean
    response variance.

    ``tau0_sq = s2 / (10 n)`` and ``tau1_sq = s2 * max((p q)^2.1 / (100 n), log n)``,
    where ``s2`` averages the unbiased column variances of ``Y``.
    """
    var = np.var(data.Y, axis=0, ddof=1)
    for k, v in enumerate(var):
        if not v > 0:
            name = data.y_names[k] if data.y_names is not None else k
            raise ZeroVarianceError(name)
    s2 = float(np.mean(var))
    n, p, q = data.n, data.p, data.q
    tau0_sq = s2 / (10.0 * n)
    tau1_sq = s2 * max((p * q) ** 2.1 / (100.0 * n), math.log(n))
    return tau0_sq, tau1_sq


def _binom_upper_tail(k, p, phi):
    # P(Bin(p, phi) >= k) as a regularised incomplete beta
    return float(special.betainc(k, p - k + 1, phi))


def calibrate_phi(p, n, target=0.1, tol=1e-10):
    """Prior inclusion probability ``phi`` with ``P(Bin(p, phi) > log n) = target``.

    The event ``sum Z > log n`` is ``sum Z >= floor(log n) + 1``.
    """
    threshold = math.log(n)
    if not p > threshold:
        raise ParameterError(f"calibrate_phi needs p > log n ({p} <= {threshold:.4g})")
    k = math.floor(threshold) + 1
    lo, hi = 0.0, 1.0
    best, best_err = 0.5, math.inf
    # bisect to the resolution of the tail evaluation; tol is only the acceptance bound
    for _ in range(200):
        phi = 0.5 * (lo + hi)
        prob = _binom_upper_tail(k, p, phi)
        if abs(prob - target) < best_err:
            best, best_err = phi, abs(prob - target)
        if prob > target:
            hi = phi
        else:
            lo = phi
        if hi - lo <= 4 * np.finfo(float).eps * max(phi, 1e-300):
            break
    if best_err > tol:
        raise NumericalError(f"phi bisection did not reach |P - {target}| <= {tol}")
    return best


@dataclass(frozen=True)
class HyperParams:
    """All prior constants of the spike-and-slab model.

    ``sigma_beta_form`` selects the sigma_beta^2 conditional: ``"derived"``
    (halved shape and scale increments) or ``"displayed"`` (un-halved).
    """

    tau0_sq: float
    tau1_sq: float
    phi: float
    nu: float
    Lambda: SpdMatrix
    alpha1: float = 0.01
    alpha2: float = 0.01
    sigma_beta_form: str = "derived"

    def __post_init__(self):
        object.__setattr__(self, "Lambda", as_spd(self.Lambda))
        for name in ("tau0_sq", "tau1_sq", "alpha1", "alpha2"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.tau0_sq <= self.tau1_sq:
            raise ParameterError(f"tau0_sq ({self.tau0_sq}) must not exceed tau1_sq ({self.tau1_sq})")
        if not 0.0 < self.phi < 1.0:
            raise ParameterError(f"phi must lie in (0, 1), got {self.phi}")
        q = self.Lambda.dim
        if not self.nu > q - 1:
            raise ParameterError(f"nu must exceed q - 1 = {q - 1}, got {self.nu}")
        if self.sigma_beta_form not in ("derived", "displayed"):
            raise ParameterError(f"sigma_beta_form must be 'derived' or 'displayed', got {self.sigma_beta_form!r}")

    @property
    def q(self):
        return self.Lambda.dim

    @classmethod
    def default(cls, data, **overrides):
        """Defaults for ``data``: tau from :func:`compute_tau`, calibrated phi,
        ``nu = q + 1``, ``Lambda = I_q``, ``alpha1 = alpha2 = 0.01``.

        Any keyword given a non-None value overrides the default.
        """
        overrides = {k: v for k, v in overrides.items() if v is not None}
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(overrides) - known
        if unknown:
            raise ParameterError(f"unknown hyperparameter(s): {sorted(unknown)}")
        vals = {}
        if "tau0_sq" not in overrides or "tau1_sq" not in overrides:
            vals["tau0_sq"], vals["tau1_sq"] = compute_tau(data)
        if "phi" not in overrides:
            vals["phi"] = calibrate_phi(data.p, data.n)
        vals["nu"] = data.q + 1.0
        vals["Lambda"] = np.eye(data.q)
        vals.update(overrides)
        hp = cls(**vals)
        if hp.q != data.q:
            raise ParameterError(f"Lambda is {hp.q}x{hp.q} but the data have q = {data.q}")
        return hp

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class ChainState:
    """Mutable state of one Gibbs chain.

    ``fitted`` caches ``X @ beta`` and is updated incrementally by the sweep.
    """

    beta: np.ndarray
    z: np.ndarray
    sigma_beta_sq: float
    sigma_y: SpdMatrix
    fitted: np.ndarray
    sigma_y_inv_chol: np.ndarray = field(default=None)

    def __post_init__(self):
        self.sigma_y = as_spd(self.sigma_y)
        if self.sigma_y_inv_chol is None:
            self.refresh_sigma_y_inverse()

    def refresh_sigma_y_inverse(self):
        self.sigma_y_inv_chol = cholesky(self.sigma_y.inverse)

    @property
    def sigma_y_inv(self):
        return self.sigma_y.inverse

    def fitted_error(self, X):
        """Relative Frobenius distance between the cache and ``X @ beta``."""
        exact = X @ self.beta
        denom = np.linalg.norm(exact)
        err = np.linalg.norm(self.fitted - exact)
        return err / denom if denom > 0 else err

    @classmethod
    def initial(cls, data, hp, mode="zero", rng=None, sigma_y_shrink=100.0):
        """Starting state.

        ``zero``: beta = 0, z = 0. ``ridge``: beta is the ridge fit
        ``X'(XX' + I)^{-1}Y``, z = 0. ``random``: z ~ Bernoulli(phi) and beta
        drawn from the matching prior components with sigma_beta^2 = 1.
        Every mode starts from sigma_beta^2 = 1 and
        Sigma_Y = diag(column variances of Y) / sigma_y_shrink. The raw column
        variances include all signal variance; with them the spike prior
        outweighs the data on the first sweep and no predictor can enter.
        """
        n, p, q = data.n, data.p, data.q
        z = np.zeros(p, dtype=np.int8)
        if mode == "zero":
            beta = np.zeros((p, q))
        elif mode == "ridge":
            X = data.X
            beta = X.T @ np.linalg.solve(X @ X.T + np.eye(n), data.Y)
        elif mode == "random":
            if rng is None:
                raise ParameterError("init_mode='random' needs an rng")
            z = (rng.random(p) < hp.phi).astype(np.int8)
            sd = np.sqrt(np.where(z == 1, hp.tau1_sq, hp.tau0_sq))
            beta = sd[:, None] * rng.standard_normal((p, q))
        else:
            raise ParameterError(f"unknown init_mode {mode!r}")
        if not sigma_y_shrink > 0:
            raise ParameterError("sigma_y_shrink must be positive")
        var = np.var(data.Y, axis=0, ddof=1)
        return cls(
            beta=np.ascontiguousarray(beta),
            z=z,
            sigma_beta_sq=1.0,
            sigma_y=SpdMatrix(np.diag(var) / sigma_y_shrink),
            fitted=np.ascontiguousarray(data.X @ beta),
        )


def _tau_sq(z_i, hp):
    return hp.tau1_sq if z_i else hp.tau0_sq


def beta_conditional(i, state, data, hp):
    """Mean and covariance of ``beta_i`` given everything else.

    ``cov = (I/(s2b tau_i^2) + ||X_i||^2 Sinv)^{-1}`` and
    ``mean = cov Sinv X_i'(Y - fitted + X_i beta_i)``.
    """
    q = data.q
    x = data.X[:, i]
    partial = data.Y - state.fitted + np.outer(x, state.beta[i])
    sinv = state.sigma_y_inv
    prec = np.eye(q) / (state.sigma_beta_sq * _tau_sq(state.z[i], hp)) + (x @ x) * sinv
    rhs = sinv @ (x @ partial)
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ rhs
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        raise NumericalError(f"non-finite beta conditional for predictor {i}")
    return mean, SpdMatrix(cov)


def sigma_beta_conditional(state, hp):
    """Inverse-gamma ``(shape, scale)`` for ``sigma_beta^2`` given ``beta, z``."""
    p, q = state.beta.shape
    tau_sq = np.where(np.asarray(state.z) == 1, hp.tau1_sq, hp.tau0_sq)
    quad = float(np.sum(np.sum(state.beta**2, axis=1) / tau_sq))
    if hp.sigma_beta_form == "displayed":
        return hp.alpha1 + p * q, hp.alpha2 + quad
    return hp.alpha1 + 0.5 * p * q, hp.alpha2 + 0.5 * quad


def z_log_odds(beta_sq_norm, q, sigma_beta_sq, hp):
    """``log P(Z_i=1|.) - log P(Z_i=0|.)`` for a coefficient row with squared norm ``beta_sq_norm``."""
    logit_phi = math.log(hp.phi) - math.log1p(-hp.phi)
    return (
        logit_phi
        - 0.5 * q * (math.log(hp.tau1_sq) - math.log(hp.tau0_sq))
        + 0.5 * beta_sq_norm / sigma_beta_sq * (1.0 / hp.tau0_sq - 1.0 / hp.tau1_sq)
    )


def z_conditional(i, state, hp):
    """``P(Z_i = 1 | beta_i, sigma_beta^2)`` computed in log space."""
    b = state.beta[i]
    if hp.tau0_sq == hp.tau1_sq:
        return hp.phi
    t = z_log_odds(float(b @ b), b.shape[0], state.sigma_beta_sq, hp)
    return float(special.expit(t))


def sigma_y_conditional(state, data, hp):
    """Inverse-Wishart ``(df, scale)`` for ``Sigma_Y``: ``(n + nu, Lambda + E'E)``."""
    resid = data.Y - data.X @ state.beta
    scale = hp.Lambda.entries + resid.T @ resid
    return data.n + hp.nu, SpdMatrix(0.5 * (scale + scale.T))
