"""Exact model posterior for small p, with sigma_beta^2 and Sigma_Y held fixed.

For a model ``k`` (0/1 vector) let ``D_k`` be the prior precision of the
coefficients and ``W_k = (Sinv kron X'X) + (I_q kron D_k)``. Integrating the
coefficients out gives

    P(Z = k | Y, sigma_beta^2, Sigma_Y)  propto  Q_k s^|k| exp(-R_k / 2)

with ``Q_k = |W_k|^{-1/2} |I_q kron D_k|^{1/2}``, ``s = phi / (1 - phi)`` and
``R_k = vec(Y)'[(Sinv kron I_n) - (Sinv kron X) W_k^{-1} (Sinv kron X')]vec(Y)``.
Everything here uses dense pq x pq algebra and column-major ``vec``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import logsumexp

from .errors import DecompositionError, NumericalError, ParameterError
from .randdist import SpdMatrix, as_spd, cholesky

__all__ = [
    "ORACLE_MAX_P",
    "OracleContext",
    "ModelQuantities",
    "model_quantities",
    "log_q_identity",
    "log_posterior_ratio",
    "posterior_ratio",
    "exact_model_posterior",
    "exact_inclusion_probs",
    "all_models",
]

ORACLE_MAX_P = 12


@dataclass(frozen=True)
class OracleContext:
    data: object
    sigma_beta_sq: float
    sigma_y: SpdMatrix
    hp: object

    def __post_init__(self):
        object.__setattr__(self, "sigma_y", as_spd(self.sigma_y))
        if self.data.p > ORACLE_MAX_P:
            raise ParameterError(f"exact enumeration is limited to p <= {ORACLE_MAX_P}, got p = {self.data.p}")
        if not self.sigma_beta_sq > 0:
            raise ParameterError("sigma_beta_sq must be positive")
        if self.sigma_y.dim != self.data.q:
            raise ParameterError("sigma_y dimension does not match q")

    def precision_diag(self, k):
        k = _as_model(k, self.data.p)
        s2 = self.sigma_beta_sq
        return np.where(k == 1, 1.0 / (s2 * self.hp.tau1_sq), 1.0 / (s2 * self.hp.tau0_sq))


@dataclass(frozen=True)
class ModelQuantities:
    d_k: np.ndarray
    w_k: np.ndarray
    log_q_k: float
    r_tilde_k: float
    s_n: float

    @property
    def q_k(self):
        return float(np.exp(self.log_q_k))


def _as_model(k, p):
    k = np.asarray(k, dtype=int).ravel()
    if k.shape != (p,) or not np.all((k == 0) | (k == 1)):
        raise ParameterError(f"model must be a 0/1 vector of length {p}")
    return k


def model_quantities(k, ctx):
    X, Y = ctx.data.X, ctx.data.Y
    n, q = ctx.data.n, ctx.data.q
    d = ctx.precision_diag(k)
    sinv = ctx.sigma_y.inverse
    w = np.kron(sinv, X.T @ X) + np.kron(np.eye(q), np.diag(d))
    try:
        c = cholesky(w)
    except DecompositionError as exc:
        raise NumericalError(f"W_k is degenerate for model {tuple(int(v) for v in k)}") from exc
    vec_y = Y.reshape(-1, order="F")
    b = np.kron(sinv, X.T) @ vec_y
    base = vec_y @ (np.kron(sinv, np.eye(n)) @ vec_y)
    r_tilde = float(base - b @ cho_solve((c, True), b))
    log_det_w = 2.0 * np.sum(np.log(np.diag(c)))
    log_q = -0.5 * log_det_w + 0.5 * q * np.sum(np.log(d))
    phi = ctx.hp.phi
    return ModelQuantities(d, w, float(log_q), r_tilde, phi / (1.0 - phi))


def log_q_identity(k, ctx):
    """``log Q_k`` through ``|(A + B'B)^{-1} A| = |I + B A^{-1} B'|^{-1}``.

    With ``A = I_q kron D_k`` and ``B = C' kron X`` (``C C' = Sigma_Y^{-1}``)
    this needs only an nq x nq determinant and never forms ``W_k``.
    """
    X = ctx.data.X
    d = ctx.precision_diag(k)
    c = cholesky(ctx.sigma_y.inverse)
    m = np.eye(ctx.data.n * ctx.data.q) + np.kron(c.T @ c, (X / d) @ X.T)
    sign, logdet = np.linalg.slogdet(m)
    if sign <= 0:
        raise NumericalError("I + B A^{-1} B' is not positive definite")
    return -0.5 * float(logdet)


def log_posterior_ratio(k, t, ctx):
    """``log P(Z=k|.) - log P(Z=t|.)``."""
    p = ctx.data.p
    k = _as_model(k, p)
    t = _as_model(t, p)
    if np.array_equal(k, t):
        return 0.0
    mk = model_quantities(k, ctx)
    mt = model_quantities(t, ctx)
    log_s = np.log(mk.s_n)
    return float(
        mk.log_q_k - mt.log_q_k
        + (int(k.sum()) - int(t.sum())) * log_s
        - 0.5 * (mk.r_tilde_k - mt.r_tilde_k)
    )


def posterior_ratio(k, t, ctx):
    return float(np.exp(log_posterior_ratio(k, t, ctx)))


def all_models(p):
    """All 0/1 tuples of length ``p`` in lexicographic order."""
    return list(itertools.product((0, 1), repeat=p))


def exact_model_posterior(ctx):
    """Normalised posterior over all 2^p models, keyed by 0/1 tuple."""
    p = ctx.data.p
    models = all_models(p)
    null = np.zeros(p, dtype=int)
    null_q = model_quantities(null, ctx)
    log_s = np.log(null_q.s_n)
    logw = np.empty(len(models))
    for j, k in enumerate(models):
        mk = model_quantities(np.array(k), ctx)
        logw[j] = mk.log_q_k - null_q.log_q_k + sum(k) * log_s - 0.5 * (mk.r_tilde_k - null_q.r_tilde_k)
    prob = np.exp(logw - logsumexp(logw))
    return dict(zip(models, prob))


def exact_inclusion_probs(ctx):
    post = exact_model_posterior(ctx)
    out = np.zeros(ctx.data.p)
    for k, w in post.items():
        out += w * np.asarray(k)
    return out
