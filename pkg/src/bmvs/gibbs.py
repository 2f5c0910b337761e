"""Gibbs sampler over (beta, Z, sigma_beta^2, Sigma_Y)."""
from __future__ import annotations

import math
import time
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _accel
from .core import ChainState, sigma_beta_conditional
from .errors import ChainError, NumericalError, ParameterError
from .kernels import coordinate_sweep
from .randdist import RngStream, SpdMatrix, sample_inv_gamma, sample_inv_wishart

__all__ = ["ChainConfig", "ChainResult", "run_chain", "MODEL_TRACK_LIMIT"]

MODEL_TRACK_LIMIT = 20
FITTED_RTOL = 1e-8


@dataclass(frozen=True)
class ChainConfig:
    """Run-length and bookkeeping options for one chain.

    ``scan`` is ``"fixed"`` (ascending index order) or ``"random"`` (a fresh
    permutation each sweep). With ``warm_start`` the first sweep instead
    visits predictors by decreasing marginal association with ``Y``.
    ``z_update="conditional"`` draws Z_i from ``P(Z_i | beta_i, sigma_beta^2)``
    after beta_i; ``"collapsed"`` draws Z_i with beta_i integrated out first.
    ``update_sigma_beta`` / ``update_sigma_y`` can be switched off to hold
    those blocks at their starting values, which is how the exact-posterior
    comparisons freeze them.
    """

    burn_in: int = 1000
    keep_iters: int = 5000
    seed: int = 0
    stream_id: int = 0
    thin: int = 1
    init_mode: str = "zero"
    scan: str = "fixed"
    z_update: str = "conditional"
    update_sigma_beta: bool = True
    update_sigma_y: bool = True
    check_every: int = 100
    warm_start: bool = True
    init_sigma_y_shrink: float = 100.0

    def __post_init__(self):
        if self.burn_in < 0:
            raise ParameterError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.keep_iters < 1:
            raise ParameterError(f"keep_iters must be >= 1, got {self.keep_iters}")
        if self.thin < 1:
            raise ParameterError(f"thin must be >= 1, got {self.thin}")
        if self.keep_iters // self.thin < 1:
            raise ParameterError("keep_iters / thin leaves no kept draws")
        if self.init_mode not in ("zero", "ridge", "random"):
            raise ParameterError(f"unknown init_mode {self.init_mode!r}")
        if self.scan not in ("fixed", "random"):
            raise ParameterError(f"unknown scan {self.scan!r}")
        if self.z_update not in ("collapsed", "conditional"):
            raise ParameterError(f"unknown z_update {self.z_update!r}")
        if not self.init_sigma_y_shrink > 0:
            raise ParameterError("init_sigma_y_shrink must be positive")
        if self.check_every < 1:
            raise ParameterError("check_every must be >= 1")

    @property
    def n_kept(self):
        return self.keep_iters // self.thin


@dataclass
class ChainResult:
    """Posterior summaries averaged over the kept draws.

    ``inclusion_prob`` is the fraction of kept draws with ``Z_i = 1``;
    ``inclusion_prob_rb`` averages the conditional probability
    ``P(Z_i = 1 | beta_i, sigma_beta^2)`` over the same draws.
    """

    inclusion_prob: np.ndarray
    inclusion_prob_rb: np.ndarray
    beta_mean: np.ndarray
    sigma_y_mean: SpdMatrix
    sigma_beta_sq_mean: float
    n_kept: int
    flip_counts: np.ndarray
    model_visit_counts: Optional[dict] = None
    elapsed: float = 0.0
    backend: str = ""
    final_state: Optional[ChainState] = field(default=None, repr=False)

    @property
    def p(self):
        return self.inclusion_prob.shape[0]

    def model_frequencies(self):
        """Visit frequency of each tracked model (tuple of 0/1)."""
        if self.model_visit_counts is None:
            raise ParameterError(f"model visits are only tracked for p <= {MODEL_TRACK_LIMIT}")
        return {k: v / self.n_kept for k, v in self.model_visit_counts.items()}


def run_chain(data, hp, cfg=None, state=None):
    """Run ``cfg.burn_in + cfg.keep_iters`` sweeps and summarise the kept draws.

    Each sweep updates ``(beta_i, Z_i)`` for every predictor, then
    ``sigma_beta^2``, then ``Sigma_Y``. A custom starting ``state`` may be
    supplied (it is modified in place).
    """
    cfg = cfg or ChainConfig()
    if hp.q != data.q:
        raise ParameterError(f"hyperparameters are for q = {hp.q}, data have q = {data.q}")
    if cfg.n_kept < 100:
        warnings.warn(f"only {cfg.n_kept} kept draws; inclusion probabilities will be coarse", stacklevel=2)
    n, p, q = data.n, data.p, data.q
    rng = RngStream(cfg.seed, cfg.stream_id)
    if state is None:
        state = ChainState.initial(data, hp, cfg.init_mode, rng, cfg.init_sigma_y_shrink)
    X = np.asfortranarray(data.X)
    Y = np.ascontiguousarray(data.Y)
    xx = np.einsum("ij,ij->j", X, X)
    state.beta = np.ascontiguousarray(state.beta, dtype=float)
    state.fitted = np.ascontiguousarray(state.fitted, dtype=float)
    state.z = np.ascontiguousarray(state.z, dtype=np.int8)
    logit_phi = math.log(hp.phi) - math.log1p(-hp.phi)
    track = p <= MODEL_TRACK_LIMIT

    z_count = np.zeros(p)
    zprob = np.zeros(p)
    zprob_sum = np.zeros(p)
    beta_sum = np.zeros((p, q))
    sigma_y_sum = np.zeros((q, q))
    s2b_sum = 0.0
    visits = Counter() if track else None
    total = cfg.burn_in + cfg.keep_iters
    flip_counts = np.zeros(total, dtype=np.int64)
    fixed_order = np.arange(p, dtype=np.int64)
    warm_order = _marginal_strength_order(X, Y, xx) if cfg.warm_start else None

    t0 = time.perf_counter()
    for sweep in range(total):
        if sweep == 0 and warm_order is not None:
            order = warm_order
        elif cfg.scan == "fixed":
            order = fixed_order
        else:
            order = rng.gen.permutation(p).astype(np.int64)
        normals = rng.standard_normal((p, q))
        uniforms = rng.random(p)
        flips, bad = coordinate_sweep(
            X, Y, xx, state.beta, state.z, state.fitted, state.sigma_y.entries,
            state.sigma_beta_sq, hp.tau0_sq, hp.tau1_sq, logit_phi,
            normals, uniforms, order, zprob, cfg.z_update == "collapsed",
        )
        if bad >= 0:
            raise ChainError(sweep, bad, "non-finite coefficient draw")
        flip_counts[sweep] = flips

        try:
            if cfg.update_sigma_beta:
                shape, scale = sigma_beta_conditional(state, hp)
                state.sigma_beta_sq = float(sample_inv_gamma(shape, scale, rng))
            if cfg.update_sigma_y:
                resid = Y - state.fitted
                scale = hp.Lambda.entries + resid.T @ resid
                state.sigma_y = sample_inv_wishart(n + hp.nu, 0.5 * (scale + scale.T), rng)
                state.refresh_sigma_y_inverse()
        except NumericalError as exc:
            raise ChainError(sweep, -1, exc) from exc
        if not (math.isfinite(state.sigma_beta_sq) and state.sigma_beta_sq > 0):
            raise ChainError(sweep, -1, "sigma_beta^2 draw is not a positive finite number")

        if (sweep + 1) % cfg.check_every == 0 or sweep == total - 1:
            _check_fitted(state, X, sweep)

        t = sweep - cfg.burn_in
        if t >= 0 and (t + 1) % cfg.thin == 0:
            z_count += state.z
            zprob_sum += zprob
            beta_sum += state.beta
            sigma_y_sum += state.sigma_y.entries
            s2b_sum += state.sigma_beta_sq
            if track:
                visits[tuple(int(v) for v in state.z)] += 1
    elapsed = time.perf_counter() - t0

    kept = cfg.n_kept
    return ChainResult(
        inclusion_prob=z_count / kept,
        inclusion_prob_rb=zprob_sum / kept,
        beta_mean=beta_sum / kept,
        sigma_y_mean=SpdMatrix(sigma_y_sum / kept),
        sigma_beta_sq_mean=s2b_sum / kept,
        n_kept=kept,
        flip_counts=flip_counts,
        model_visit_counts=dict(visits) if track else None,
        elapsed=elapsed,
        backend=_accel.backend(),
        final_state=state,
    )


def _marginal_strength_order(X, Y, xx):
    # descending ||X_i'(Y - mean Y)||^2 / ||X_i||^2, ties by index
    score = np.sum((X.T @ (Y - Y.mean(axis=0))) ** 2, axis=1) / np.where(xx > 0, xx, 1.0)
    return np.lexsort((np.arange(X.shape[1]), -score)).astype(np.int64)


def _check_fitted(state, X, sweep):
    err = state.fitted_error(X)
    if not err <= FITTED_RTOL:
        raise ChainError(sweep, -1, f"fitted cache drifted from X @ beta (relative error {err:.3g})")
    # resynchronise so rounding never accumulates across checks
    state.fitted[...] = X @ state.beta
