"""File formats: CSV matrices, genotype tables, truth/report JSON, key=value
run configuration."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError, ParameterError
from .gibbs import ChainConfig
from .randdist import SpdMatrix

__all__ = [
    "CsvFormatError",
    "read_matrix_csv",
    "write_matrix_csv",
    "read_genotype_csv",
    "encode_genotypes",
    "write_truth",
    "read_truth",
    "write_json",
    "read_report",
    "RunConfig",
    "parse_config_text",
    "read_config",
    "REPORT_SCHEMA",
]

FLOAT_FMT = "%.17g"
DEFAULT_MAF = 0.05


class CsvFormatError(DataError):
    def __init__(self, path, row, col, message):
        self.row, self.col = row, col
        where = f"row {row}" if col is None else f"row {row}, column {col}"
        super().__init__(f"{path}: {where}: {message}")


def _parse_float(tok):
    # float() accepts 'nan', 'inf', '1_000' and surrounding blanks; be stricter
    t = tok.strip()
    if not t or "_" in t:
        raise ValueError
    v = float(t)
    if not math.isfinite(v):
        raise ValueError
    return v


def _looks_numeric(tok):
    try:
        float(tok.strip())
        return True
    except ValueError:
        return False


def _is_genotype_call(tok):
    t = tok.strip()
    return t in ("0", "1", "2") or (len(t) == 2 and t.isalpha())


def _read_rows(path, is_value=_looks_numeric):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh)]
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    if not rows:
        raise CsvFormatError(path, 1, None, "file is empty")
    header = None
    if not all(is_value(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
    width = len(rows[0])
    start = 1 if header is not None else 0
    for r, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise CsvFormatError(path, r, None, f"expected {width} fields, found {len(row)}")
    return header, rows[start:], start


def read_matrix_csv(path):
    """Read a numeric CSV; returns ``(matrix, names)``, ``names`` None without a header.

    A first row with any non-numeric field is taken as a header. Decimal
    points only; NaN and infinite values are rejected.
    """
    header, body, start = _read_rows(path)
    if not body:
        raise CsvFormatError(path, start + 1, None, "no data rows")
    out = np.empty((len(body), len(body[0])))
    for r, row in enumerate(body):
        for c, tok in enumerate(row):
            try:
                out[r, c] = _parse_float(tok)
            except ValueError:
                raise CsvFormatError(path, start + r + 1, c + 1, f"not a finite number: {tok!r}") from None
    return out, header


def write_matrix_csv(path, matrix, names=None):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if names is not None:
            if len(names) != matrix.shape[1]:
                raise ParameterError("names length does not match the column count")
            fh.write(",".join(names) + "\n")
        for row in matrix:
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


def encode_genotypes(tokens):
    """Map one column of genotype calls to minor-allele counts in {0, 1, 2}.

    Numeric calls must already be 0/1/2. Two-letter calls (``AA``, ``Aa``,
    ``AG``...) are coded by the number of alleles differing from the most
    frequent allele in the column.
    """
    toks = [t.strip() for t in tokens]
    if all(_looks_numeric(t) for t in toks):
        vals = np.array([float(t) for t in toks])
        if not np.all(np.isin(vals, (0.0, 1.0, 2.0))):
            raise ValueError("numeric genotype codes must be 0, 1 or 2")
        return vals
    if any(len(t) != 2 for t in toks):
        raise ValueError("letter genotypes must be two characters")
    counts = {}
    for t in toks:
        for a in t:
            counts[a] = counts.get(a, 0) + 1
    major = min(counts, key=lambda a: (-counts[a], a))
    return np.array([float(sum(a != major for a in t)) for t in toks])


def read_genotype_csv(path, maf=DEFAULT_MAF):
    """Read genotype calls and drop columns with minor-allele frequency below ``maf``.

    Returns ``(matrix, names, kept_columns)``. The first row is a header
    unless every field is a valid call.
    """
    if not 0.0 <= maf < 0.5:
        raise ParameterError(f"maf threshold must lie in [0, 0.5), got {maf}")
    header, body, start = _read_rows(path, _is_genotype_call)
    if not body:
        raise CsvFormatError(path, start + 1, None, "no data rows")
    cols = []
    for c in range(len(body[0])):
        try:
            cols.append(encode_genotypes([row[c] for row in body]))
        except ValueError as exc:
            raise CsvFormatError(path, start + 1, c + 1, str(exc)) from None
    G = np.column_stack(cols)
    freq = G.mean(axis=0) / 2.0
    minor = np.minimum(freq, 1.0 - freq)
    kept = np.flatnonzero(minor >= maf) if maf > 0 else np.arange(G.shape[1])
    names = None if header is None else [header[j] for j in kept]
    return G[:, kept], names, [int(j) for j in kept]


def _jsonable(obj):
    if isinstance(obj, SpdMatrix):
        return obj.entries.tolist()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path, payload):
    # Python's float repr is the shortest string that round-trips exactly
    text = json.dumps(payload, default=_jsonable, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_truth(path, truth):
    write_json(path, {
        "true_model": list(truth.true_model),
        "beta": truth.beta_true,
        "sigma_y": truth.sigma_y_true,
        "rho": truth.rho,
    })


def _load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def read_truth(path):
    obj = _load_json(path)
    if not isinstance(obj, dict) or "true_model" not in obj:
        raise DataError(f"{path}: missing 'true_model'")
    return obj


def read_report(path):
    obj = _load_json(path)
    for key in ("inclusion_prob", "selected"):
        if key not in obj:
            raise DataError(f"{path}: missing {key!r}")
    return obj


REPORT_SCHEMA = {
    "type": "object",
    "required": ["config", "seed", "n", "p", "q", "inclusion_prob", "selected",
                 "rule", "aicc", "aicc_path", "wall_time", "hyperparams"],
    "properties": {
        "config": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0},
        "n": {"type": "integer", "minimum": 2},
        "p": {"type": "integer", "minimum": 1},
        "q": {"type": "integer", "minimum": 1},
        "inclusion_prob": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "selected": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "rule": {"enum": ["aicc", "median"]},
        "aicc": {"type": ["number", "null"]},
        "aicc_path": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["size", "aicc"],
                "properties": {"size": {"type": "integer"}, "aicc": {"type": ["number", "null"]}},
            },
        },
        "wall_time": {"type": "number", "minimum": 0},
        "hyperparams": {"type": "object"},
        "screen": {"type": ["object", "null"]},
    },
}


_CHAIN_FIELDS = ("burn_in", "keep_iters", "seed", "thin", "init_mode", "scan", "z_update")
_HP_FIELDS = ("alpha1", "alpha2", "nu", "phi", "tau0_sq", "tau1_sq")
_TYPES = {
    "burn_in": int, "keep_iters": int, "seed": int, "thin": int,
    "init_mode": str, "scan": str, "z_update": str,
    "alpha1": float, "alpha2": float, "nu": float, "phi": float, "tau0_sq": float, "tau1_sq": float,
    "screen_size": int, "selection_rule": str, "max_model_size": int, "output": str,
    "sigma_beta_form": str,
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a ``fit`` run needs besides the data files."""

    burn_in: int = 1000
    keep_iters: int = 5000
    seed: int = 0
    thin: int = 1
    init_mode: str = "zero"
    scan: str = "fixed"
    z_update: str = "conditional"
    alpha1: Optional[float] = None
    alpha2: Optional[float] = None
    nu: Optional[float] = None
    phi: Optional[float] = None
    tau0_sq: Optional[float] = None
    tau1_sq: Optional[float] = None
    sigma_beta_form: Optional[str] = None
    screen_size: Optional[int] = None
    selection_rule: str = "aicc"
    max_model_size: Optional[int] = None
    output: Optional[str] = None

    def __post_init__(self):
        if self.selection_rule not in ("aicc", "median"):
            raise ParameterError(f"selection_rule must be 'aicc' or 'median', got {self.selection_rule!r}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if self.screen_size is not None and self.screen_size < 1:
            raise ParameterError("screen_size must be positive")
        self.chain_config()

    def chain_config(self):
        return ChainConfig(**{k: getattr(self, k) for k in _CHAIN_FIELDS})

    def hp_overrides(self):
        keys = _HP_FIELDS + ("sigma_beta_form",)
        return {k: getattr(self, k) for k in keys if getattr(self, k) is not None}

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_sources(cls, file_values=None, cli_values=None):
        """Merge config-file values with CLI values; CLI wins, None means unset."""
        merged = {}
        for src in (file_values or {}, cli_values or {}):
            for k, v in src.items():
                if v is not None:
                    merged[k] = v
        unknown = set(merged) - set(_TYPES)
        if unknown:
            raise ParameterError(f"unknown configuration key(s): {sorted(unknown)}")
        typed = {}
        for k, v in merged.items():
            try:
                typed[k] = _TYPES[k](v) if _TYPES[k] is not int else _as_int(v)
            except (TypeError, ValueError):
                raise ParameterError(f"configuration key {k!r}: cannot read {v!r} as {_TYPES[k].__name__}") from None
        return cls(**typed)


def _as_int(v):
    if isinstance(v, int):
        return v
    s = str(v).strip()
    if not s.lstrip("-").isdigit():
        raise ValueError
    return int(s)


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{source}: line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if not key or not value:
            raise ParameterError(f"{source}: line {lineno}: empty key or value")
        if key not in _TYPES:
            raise ParameterError(f"{source}: line {lineno}: unknown key {key!r}")
        if key in out:
            raise ParameterError(f"{source}: line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config(path):
    return parse_config_text(Path(path).read_text(encoding="utf-8"), str(path))
