"""``bmvs`` command line: simulate, screen, fit, study, evaluate.

Exit codes: 0 success, 2 usage error, 3 data or validation error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np

from . import io as bio
from .core import DataSet
from .dcsis import DEFAULT_SCREEN_SIZE, screen
from .errors import DataError, NumericalError
from .gibbs import ChainConfig
from .metrics import METRIC_LABELS, MetricsRow, evaluate
from .pipeline import fit_model, run_replicates, simulation_generator, summarize
from .simgen import SimSpec, generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


def _add_data_args(sp):
    sp.add_argument("--x", required=True, help="predictor CSV (rows = observations)")
    sp.add_argument("--y", required=True, help="response CSV")
    sp.add_argument("--genotype", action="store_true", help="X holds genotype calls (0/1/2 or AA/Aa/aa)")
    sp.add_argument("--maf", type=float, default=bio.DEFAULT_MAF, help="minor-allele-frequency filter for --genotype")


def _add_chain_args(sp, with_seed=True):
    sp.add_argument("--burn-in", type=int)
    sp.add_argument("--keep", dest="keep_iters", type=int)
    sp.add_argument("--thin", type=int)
    if with_seed:
        sp.add_argument("--seed", type=int)
    sp.add_argument("--init-mode", choices=("zero", "ridge", "random"))
    sp.add_argument("--scan", choices=("fixed", "random"))
    sp.add_argument("--z-update", choices=("conditional", "collapsed"))
    for name in ("alpha1", "alpha2", "nu", "phi", "tau0-sq", "tau1-sq"):
        sp.add_argument(f"--{name}", type=float)
    sp.add_argument("--sigma-beta-form", choices=("derived", "displayed"))
    sp.add_argument("--rule", dest="selection_rule", choices=("aicc", "median"))
    sp.add_argument("--max-size", dest="max_model_size", type=int)
    sp.add_argument("--screen", dest="screen_size", type=int, help="DC-SIS screen to this many columns first")


def build_parser():
    ap = argparse.ArgumentParser(prog="bmvs", description="Bayesian multivariate variable selection")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="write a simulated data set")
    sp.add_argument("--setting", type=int, default=1, choices=(1, 2, 3, 4))
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--p", type=int, default=500)
    sp.add_argument("--q", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--true-size", type=int)
    sp.add_argument("--rho", type=float)
    sp.add_argument("--out", default=".", help="output directory")

    sp = sub.add_parser("screen", help="DC-SIS screening report")
    _add_data_args(sp)
    sp.add_argument("--d", type=int, default=DEFAULT_SCREEN_SIZE)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("fit", help="run the sampler and select a model")
    _add_data_args(sp)
    sp.add_argument("--config", help="key=value configuration file")
    _add_chain_args(sp)
    sp.add_argument("--out", dest="output")

    sp = sub.add_parser("study", help="replication study on a simulation setting")
    sp.add_argument("--setting", type=int, default=1, choices=(1, 2, 3, 4))
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--p", type=int, default=500)
    sp.add_argument("--q", type=int)
    sp.add_argument("--reps", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0, help="master seed")
    sp.add_argument("--threads", type=int, default=1)
    _add_chain_args(sp, with_seed=False)
    sp.add_argument("--out", help="prefix for <out>.json and <out>.txt")

    sp = sub.add_parser("evaluate", help="score a report against a truth file")
    sp.add_argument("--report", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--out")
    return ap


def _load_data(args):
    if args.genotype:
        X, names, _ = bio.read_genotype_csv(args.x, args.maf)
        if X.shape[1] == 0:
            raise DataError("no genotype column passes the minor-allele-frequency filter")
    else:
        X, names = bio.read_matrix_csv(args.x)
    Y, ynames = bio.read_matrix_csv(args.y)
    return DataSet(X, Y, names, ynames)


def _cli_values(args, keys):
    vals = {}
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            vals[k] = v
    return vals


_RUN_KEYS = ("burn_in", "keep_iters", "thin", "seed", "init_mode", "scan", "z_update",
             "alpha1", "alpha2", "nu", "phi", "tau0_sq", "tau1_sq", "sigma_beta_form",
             "selection_rule", "max_model_size", "screen_size", "output")


def _hp_record(hp):
    return {
        "tau0_sq": hp.tau0_sq, "tau1_sq": hp.tau1_sq, "phi": hp.phi, "nu": hp.nu,
        "alpha1": hp.alpha1, "alpha2": hp.alpha2, "Lambda": hp.Lambda,
        "sigma_beta_form": hp.sigma_beta_form,
    }


def build_report(data, rc, outcome, wall_time):
    sel = outcome.selected
    res = outcome.result
    scr = outcome.screen
    return {
        "config": rc.as_dict(),
        "seed": rc.seed,
        "n": data.n,
        "p": data.p,
        "q": data.q,
        "x_names": list(data.x_names) if data.x_names is not None else None,
        "inclusion_prob": res.inclusion_prob,
        "inclusion_prob_rb": res.inclusion_prob_rb,
        "selected": list(sel.indices),
        "rule": sel.rule,
        "aicc": sel.aicc,
        "aicc_path": [{"size": j, "aicc": v} for j, v in sel.aicc_path],
        "sigma_beta_sq_mean": res.sigma_beta_sq_mean,
        "sigma_y_mean": res.sigma_y_mean,
        "hyperparams": _hp_record(outcome.hp),
        "screen": None if scr is None else {"d": scr.d, "kept": list(scr.kept)},
        "backend": res.backend,
        "wall_time": wall_time,
    }


def cmd_simulate(args):
    spec = SimSpec(args.setting, args.n, args.p, args.q, args.seed, args.true_size, None, args.rho)
    data, truth = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bio.write_matrix_csv(out / "X.csv", data.X, [f"x{j + 1}" for j in range(data.p)])
    bio.write_matrix_csv(out / "Y.csv", data.Y, [f"y{k + 1}" for k in range(data.q)])
    bio.write_truth(out / "truth.json", truth)
    print(f"wrote {out / 'X.csv'}, {out / 'Y.csv'}, {out / 'truth.json'}")


def cmd_screen(args):
    data = _load_data(args)
    rep = screen(data, args.d)
    bio.write_json(args.out, {
        "d": rep.d,
        "kept": list(rep.kept),
        "scores": rep.scores,
        "x_names": list(data.x_names) if data.x_names is not None else None,
    })
    print(f"kept {rep.d} of {data.p} predictors; report in {args.out}")


def cmd_fit(args):
    file_vals = bio.read_config(args.config) if args.config else {}
    rc = bio.RunConfig.from_sources(file_vals, _cli_values(args, _RUN_KEYS))
    data = _load_data(args)
    t0 = time.perf_counter()
    outcome = fit_model(data, rc.chain_config(), rc.hp_overrides(), rc.screen_size,
                        rc.selection_rule, rc.max_model_size)
    report = build_report(data, rc, outcome, time.perf_counter() - t0)
    out = rc.output or "report.json"
    bio.write_json(out, report)
    print(f"selected {outcome.selected.size} predictor(s): {list(outcome.selected.indices)}")
    print(f"report in {out}")


def format_table(summary, label="BMVS"):
    cols = list(METRIC_LABELS.values())
    widths = [max(len(c), 8) for c in cols]
    head = f"{'method':<8}  " + "  ".join(f"{c:>{w}}" for c, w in zip(cols, widths))
    vals = [getattr(summary, k) for k in METRIC_LABELS]
    body = f"{label:<8}  " + "  ".join(f"{v:>{w}.3g}" if k == "mpp0" else f"{v:>{w}.3f}"
                                       for k, v, w in zip(METRIC_LABELS, vals, widths))
    return head + "\n" + body


def cmd_study(args):
    rc = bio.RunConfig.from_sources({}, _cli_values(args, _RUN_KEYS))
    spec = SimSpec(args.setting, args.n, args.p, args.q)
    cfg = dataclasses.replace(rc.chain_config(), seed=args.seed)
    outcomes = run_replicates(simulation_generator(spec, args.seed), rc.hp_overrides(), cfg, args.reps,
                              rc.screen_size, rc.selection_rule, rc.max_model_size, args.threads)
    summ = summarize(outcomes)
    for o in outcomes:
        if not o.ok:
            print(f"replicate {o.rep} failed: {o.error}", file=sys.stderr)
    if summ.summary is None:
        raise NumericalError("every replicate failed")
    label = "DC-SIS+BMVS" if rc.screen_size else "BMVS"
    table = format_table(summ.summary, label)
    print(table)
    print(f"{len(summ.rows)} replicate(s), {summ.failures} failure(s)")
    if args.out:
        payload = {
            "setting": args.setting, "n": args.n, "p": args.p, "reps": args.reps, "seed": args.seed,
            "failures": summ.failures,
            "summary": summ.summary.as_dict(),
            "rows": [dict(rep=o.rep, **o.metrics.as_dict()) for o in outcomes if o.ok],
        }
        bio.write_json(f"{args.out}.json", payload)
        Path(f"{args.out}.txt").write_text(table + "\n", encoding="utf-8")


def cmd_evaluate(args):
    report = bio.read_report(args.report)
    truth = bio.read_truth(args.truth)
    probs = np.asarray(report["inclusion_prob"], dtype=float)
    row: MetricsRow = evaluate(report["selected"], truth["true_model"], probs)
    print("\n".join(f"{METRIC_LABELS[k]}: {v!r}" for k, v in row.as_dict().items()))
    if args.out:
        bio.write_json(args.out, row.as_dict())


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    handlers = {
        "simulate": cmd_simulate, "screen": cmd_screen, "fit": cmd_fit,
        "study": cmd_study, "evaluate": cmd_evaluate,
    }
    try:
        handlers[args.command](args)
    except (DataError, OSError) as exc:
        print(f"bmvs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"bmvs {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
