"""Fit one data set end to end, or run a seeded replication study."""
from __future__ import annotations

import dataclasses
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import HyperParams
from .dcsis import screen as dc_screen
from .errors import BMVSError, ParameterError
from .gibbs import ChainConfig, ChainResult, run_chain
from .metrics import MetricsRow, aggregate, evaluate
from .select import ModelIndex, default_max_size, select_by_aicc, select_by_median_probability
from .simgen import SimSpec, generate

__all__ = [
    "FitOutcome",
    "ReplicateOutcome",
    "StudySummary",
    "fit_model",
    "run_replicates",
    "summarize",
    "simulation_generator",
    "derive_seed",
]

RULES = ("aicc", "median")


@dataclass
class FitOutcome:
    """Chain summary and selection, both indexed by the original columns."""

    result: ChainResult
    selected: ModelIndex
    hp: HyperParams
    screen: Optional[object] = None


@dataclass
class ReplicateOutcome:
    rep: int
    result: Optional[ChainResult]
    selected: Optional[ModelIndex]
    metrics: Optional[MetricsRow]
    error: Optional[str] = None

    @property
    def ok(self):
        return self.error is None


@dataclass
class StudySummary:
    summary: Optional[MetricsRow]
    rows: list
    failures: int


def derive_seed(master_seed, rep):
    """Independent 64-bit seed for replicate ``rep`` of a study."""
    return int(np.random.SeedSequence([int(master_seed), int(rep)]).generate_state(1, np.uint64)[0])


def _resolve_hp(data, hp_policy):
    if hp_policy is None:
        return HyperParams.default(data)
    if isinstance(hp_policy, HyperParams):
        return hp_policy
    if isinstance(hp_policy, dict):
        return HyperParams.default(data, **hp_policy)
    return hp_policy(data)


def _expand(result, kept, p):
    # map summaries of a screened fit back to all p columns; dropped columns get 0
    idx = np.asarray(kept)

    def full(vals):
        out = np.zeros((p,) + vals.shape[1:])
        out[idx] = vals
        return out

    return dataclasses.replace(
        result,
        inclusion_prob=full(result.inclusion_prob),
        inclusion_prob_rb=full(result.inclusion_prob_rb),
        beta_mean=full(result.beta_mean),
        model_visit_counts=None,
    )


def fit_model(data, cfg=None, hp_policy=None, screen_d=None, rule="aicc", max_size=None):
    """Optional DC-SIS screen, then the chain, then selection.

    With screening, hyperparameters are computed on the screened data.
    """
    if rule not in RULES:
        raise ParameterError(f"selection rule must be one of {RULES}, got {rule!r}")
    cfg = cfg or ChainConfig()
    report = None
    work = data
    if screen_d is not None and screen_d < data.p:
        report = dc_screen(data, screen_d)
        work = data.subset(report.kept_sorted)
    hp = _resolve_hp(work, hp_policy)
    result = run_chain(work, hp, cfg)
    if rule == "aicc":
        cap = default_max_size(work.n, work.q) if max_size is None else max_size
        sel = select_by_aicc(result, work, min(cap, work.p))
    else:
        sel = select_by_median_probability(result, work)
    if report is not None:
        kept = report.kept_sorted
        result = _expand(result, kept, data.p)
        sel = dataclasses.replace(sel, indices=tuple(kept[i] for i in sel.indices))
    return FitOutcome(result, sel, hp, report)


def simulation_generator(spec, master_seed=0):
    """``rep -> (DataSet, SimTruth)`` drawing replicate ``rep`` from ``spec``
    with seed ``derive_seed(master_seed, rep)``."""

    def gen(rep):
        return generate(dataclasses.replace(spec, seed=derive_seed(master_seed, rep)))

    return gen


def _one(rep, data_generator, hp_policy, cfg, screen_d, rule, max_size):
    try:
        data, truth = data_generator(rep)
        rep_cfg = dataclasses.replace(cfg, stream_id=rep)
        out = fit_model(data, rep_cfg, hp_policy, screen_d, rule, max_size)
        return ReplicateOutcome(rep, out.result, out.selected, evaluate(out.selected, truth, out.result))
    except (BMVSError, ArithmeticError, np.linalg.LinAlgError) as exc:
        msg = f"{type(exc).__name__}: {exc}"
        return ReplicateOutcome(rep, None, None, None, msg)
    except Exception:  # recorded, not fatal, but keep the traceback
        return ReplicateOutcome(rep, None, None, None, traceback.format_exc(limit=5))


def run_replicates(data_generator: Callable, hp_policy=None, cfg=None, n_reps=1,
                   screen_d=None, rule="aicc", max_size=None, threads=1):
    """Run ``n_reps`` independent replicates; chain ``rep`` uses stream ``rep``.

    Failures are captured in ``ReplicateOutcome.error`` rather than raised.
    Output order is by replicate regardless of ``threads``.
    """
    if n_reps < 1:
        raise ParameterError(f"n_reps must be positive, got {n_reps}")
    cfg = cfg or ChainConfig()
    args = (data_generator, hp_policy, cfg, screen_d, rule, max_size)
    if threads <= 1:
        return [_one(r, *args) for r in range(n_reps)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: _one(r, *args), range(n_reps)))


def summarize(outcomes):
    rows = [o.metrics for o in outcomes if o.ok]
    return StudySummary(aggregate(rows) if rows else None, rows, sum(not o.ok for o in outcomes))


def study(spec: SimSpec, n_reps, master_seed=0, cfg=None, **kwargs):
    """Replication study on a simulation setting; returns (outcomes, summary)."""
    outcomes = run_replicates(simulation_generator(spec, master_seed), cfg=cfg, n_reps=n_reps, **kwargs)
    return outcomes, summarize(outcomes)
