"""Command-line front end: learn, sample, fit, and eval subcommands.

All outputs are deterministic functions of the flags and input files; every
random choice flows from the single ``--seed`` flag.  Exit codes: 0 success,
2 usage error, 3 capacity error, 1 any other failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .data import (DEFAULT_TABLE_CAP, Dataset, JointTable, load_csv, make_folds,
                   sample_joint)
from .errors import CapacityError, CmnError
from .evaluate import cross_validated_accuracy, experiment_report, kl_divergence
from .model import structure_from_json_dict, structure_to_json_dict
from .params import (fit_mle, joint_of, model_dimension, model_from_json_dict,
                     model_to_json_dict)
from .scoring import ScoredModel, sbic
from .search import kappa_sweep


def _json_dump(obj: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def _load_json(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _kappa_token(text: str) -> str | float:
    if text == "eps":
        return "eps"
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"kappa must be a float in (0, 1] or 'eps', got {text!r}") from exc
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"kappa must lie in (0, 1], got {text}")
    return value


def _scored_model_json(model: ScoredModel, cards, names) -> dict:
    obj = structure_to_json_dict(model.structure, cards)
    obj["variable_names"] = list(names)
    obj["scores"] = {
        "kappa": model.kappa_label,
        "log_mpl": model.log_mpl,
        "log_mpl_breakdown": list(model.log_mpl_breakdown),
        "log_prior": model.log_prior,
        "dimension": model.dimension,
        "log_lik": model.log_lik,
        "bic": model.bic,
        "sbic": model.sbic,
        "n": model.n,
    }
    if model.model is not None:
        obj.update(model_to_json_dict(model.model))
    return obj


def _load_dataset(args) -> Dataset:
    return load_csv(args.data, has_header=args.header, schema=args.schema)


def _load_truth(path: str | Path, cap: int) -> JointTable:
    obj = _load_json(path)
    if "phi" in obj:
        structure, cards = structure_from_json_dict(obj)
        return joint_of(model_from_json_dict(obj, structure, cards), cap=cap)
    return JointTable.from_json_dict(obj, cap=cap)


def cmd_learn(args) -> int:
    dataset = _load_dataset(args)
    sweep = kappa_sweep(dataset, kappa_grid=args.kappa or None, alpha=args.alpha,
                        fit_tolerance=args.tol, fit_max_iter=args.max_iter,
                        cap=args.cap, threads=args.threads)
    out = Path(args.out)
    _json_dump(_scored_model_json(sweep.selected, dataset.cardinalities,
                                  dataset.variable_names), out)
    mn_out = args.mn_out or out.with_suffix(".mn.json")
    _json_dump(_scored_model_json(sweep.mn, dataset.cardinalities,
                                  dataset.variable_names), mn_out)
    report = experiment_report(sweep.models, cap=args.cap)
    report_out = args.report_out or out.with_suffix(".report.json")
    _json_dump(report.to_json_dict(), report_out)
    print(report.to_text())
    return 0


def cmd_sample(args) -> int:
    obj = _load_json(args.model)
    if "phi" not in obj:
        raise CmnError(
            f"{args.model} carries no fitted parameters; run `cmnlearn fit` first")
    structure, cards = structure_from_json_dict(obj)
    model = model_from_json_dict(obj, structure, cards)
    table = joint_of(model, cap=args.cap)
    names = obj.get("variable_names")
    dataset = sample_joint(table, args.n, args.seed, variable_names=names)
    dataset.to_csv(args.out)
    return 0


def cmd_fit(args) -> int:
    dataset = _load_dataset(args)
    obj = _load_json(args.structure)
    structure, cards = structure_from_json_dict(obj)
    if cards != dataset.cardinalities:
        raise CmnError(
            f"structure declares cardinalities {list(cards)} but the dataset has "
            f"{list(dataset.cardinalities)} over {dataset.d} variables")
    model, log_lik = fit_mle(dataset, structure, tolerance=args.tol,
                             max_iter=args.max_iter, cap=args.cap)
    dimension = model_dimension(structure, dataset.cardinalities)
    out_obj = structure_to_json_dict(structure, cards)
    out_obj["variable_names"] = list(dataset.variable_names)
    out_obj["scores"] = {
        "dimension": dimension,
        "log_lik": log_lik,
        "bic": log_lik - 0.5 * dimension * math.log(dataset.n),
        "sbic": sbic(log_lik, dimension, dataset.n),
        "n": dataset.n,
    }
    out_obj.update(model_to_json_dict(model))
    _json_dump(out_obj, args.out)
    return 0


def cmd_eval(args) -> int:
    metrics: dict = {}
    if args.truth:
        if not args.model:
            raise CmnError("--truth requires --model")
        truth = _load_truth(args.truth, args.cap)
        obj = _load_json(args.model)
        if "phi" not in obj:
            raise CmnError(f"{args.model} carries no fitted parameters")
        structure, cards = structure_from_json_dict(obj)
        if cards != truth.cardinalities:
            raise CmnError(
                f"model has {len(cards)} variables {list(cards)}, truth table has "
                f"{len(truth.cardinalities)} variables {list(truth.cardinalities)}")
        fitted = joint_of(model_from_json_dict(obj, structure, cards), cap=args.cap)
        metrics["kl"] = kl_divergence(truth, fitted)
    if args.folds:
        if not args.data:
            raise CmnError("--folds requires --data")
        dataset = _load_dataset(args)
        plan = make_folds(dataset.n, args.folds, args.seed)
        result = cross_validated_accuracy(
            dataset, plan, kappa_grid=args.kappa or None, alpha=args.alpha,
            fit_tolerance=args.tol, fit_max_iter=args.max_iter, cap=args.cap,
            threads=args.threads)
        metrics["cross_validation"] = result.to_json_dict()
    if not metrics:
        raise CmnError("nothing to evaluate: pass --folds and/or --truth")
    text = json.dumps(metrics, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for every random choice (default 0)")
    parser.add_argument("--cap", type=int, default=DEFAULT_TABLE_CAP,
                        help="dense-table cell cap (default 2^22)")
    parser.add_argument("--threads", type=_positive_int, default=1,
                        help="worker cap for parallel candidate evaluation")


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="input CSV of category codes")
    parser.add_argument("--header", action="store_true",
                        help="treat the first CSV row as variable names")
    parser.add_argument("--schema", default=None,
                        help="JSON sidecar with variable_names/cardinalities")


def _add_learn_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kappa", action="append", type=_kappa_token, default=[],
                        metavar="K",
                        help="context prior strength in (0,1] or 'eps'; repeatable "
                             "(default grid: eps, n^-1, n^-1/2, n^-1/4)")
    parser.add_argument("--alpha", type=float, default=0.5,
                        help="Dirichlet pseudo-count per cell (default 0.5)")
    parser.add_argument("--tol", type=float, default=1e-8,
                        help="MLE gradient-norm tolerance (default 1e-8)")
    parser.add_argument("--max-iter", type=int, default=200,
                        help="MLE iteration limit (default 200)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmnlearn",
        description="Learn, fit, sample and evaluate contextual Markov networks "
                    "on discrete data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_learn = sub.add_parser("learn", help="learn a structure and fit its parameters")
    _add_data_flags(p_learn)
    p_learn.add_argument("--out", required=True, help="output model JSON path")
    p_learn.add_argument("--mn-out", default=None,
                         help="output path for the context-free model "
                              "(default: <out>.mn.json)")
    p_learn.add_argument("--report-out", default=None,
                         help="output path for the comparison report "
                              "(default: <out>.report.json)")
    _add_learn_flags(p_learn)
    _add_common(p_learn)
    p_learn.set_defaults(func=cmd_learn)

    p_sample = sub.add_parser("sample", help="sample rows from a fitted model")
    p_sample.add_argument("--model", required=True, help="fitted model JSON")
    p_sample.add_argument("--n", required=True, type=_positive_int,
                          help="number of rows to draw")
    p_sample.add_argument("--out", required=True, help="output CSV path")
    _add_common(p_sample)
    p_sample.set_defaults(func=cmd_sample)

    p_fit = sub.add_parser("fit", help="fit maximum-likelihood parameters to a structure")
    _add_data_flags(p_fit)
    p_fit.add_argument("--structure", required=True, help="structure or model JSON")
    p_fit.add_argument("--out", required=True, help="output model JSON path")
    p_fit.add_argument("--tol", type=float, default=1e-8)
    p_fit.add_argument("--max-iter", type=int, default=200)
    _add_common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_eval = sub.add_parser("eval", help="cross-validated accuracy and/or KL to a truth")
    p_eval.add_argument("--data", default=None, help="input CSV (for --folds)")
    p_eval.add_argument("--header", action="store_true")
    p_eval.add_argument("--schema", default=None)
    p_eval.add_argument("--folds", type=int, default=None,
                        help="number of cross-validation folds")
    p_eval.add_argument("--model", default=None, help="fitted model JSON (for --truth)")
    p_eval.add_argument("--truth", default=None,
                        help="truth joint-table JSON (or fitted model JSON)")
    p_eval.add_argument("--out", default=None, help="metrics JSON path (default stdout)")
    _add_learn_flags(p_eval)
    _add_common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (CmnError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
