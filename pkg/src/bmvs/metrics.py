"""Selection-quality metrics against a known true model."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ParameterError

__all__ = ["MetricsRow", "evaluate", "aggregate", "METRIC_LABELS"]

METRIC_LABELS = {
    "mpp1": "mpp1",
    "mpp0": "mpp0",
    "exact": "exact-power",
    "superset": "superset-power",
    "fdr": "fdr",
}


@dataclass(frozen=True)
class MetricsRow:
    mpp1: float
    mpp0: float
    exact: float
    superset: float
    fdr: float

    def as_dict(self):
        return asdict(self)


def evaluate(selected, truth, result):
    """Score one replicate.

    ``selected`` is a ``ModelIndex`` or index collection, ``truth`` a
    ``SimTruth`` or index collection, ``result`` a ``ChainResult`` or the
    inclusion-probability vector itself.
    """
    probs = np.asarray(getattr(result, "inclusion_prob", result), dtype=float)
    p = probs.shape[0]
    sel = set(int(i) for i in getattr(selected, "indices", selected))
    true = set(int(i) for i in getattr(truth, "true_model", truth))
    beta_true = getattr(truth, "beta_true", None)
    if beta_true is not None and beta_true.shape[0] != p:
        raise ParameterError(f"truth has p = {beta_true.shape[0]} but result has p = {p}")
    if any(i < 0 or i >= p for i in sel | true):
        raise ParameterError(f"index out of range for p = {p}")
    mask = np.zeros(p, dtype=bool)
    mask[list(true)] = True
    mpp1 = float(probs[mask].mean()) if mask.any() else 0.0
    mpp0 = float(probs[~mask].mean()) if (~mask).any() else 0.0
    fdr = len(sel - true) / len(sel) if sel else 0.0
    return MetricsRow(mpp1, mpp0, float(sel == true), float(sel >= true), float(fdr))


def aggregate(rows):
    rows = list(rows)
    if not rows:
        raise ParameterError("cannot aggregate an empty list of metrics")
    names = [f.name for f in fields(MetricsRow)]
    return MetricsRow(**{k: float(np.mean([getattr(r, k) for r in rows])) for k in names})
