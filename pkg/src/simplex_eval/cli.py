"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 convergence or resampling failure,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import pickle
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .config import EVALUATORS, MEASURE_NAMES, load_config, merge_overrides
from .evaluators import ResamplingTimeoutError
from .experiments import (
    EXP1_SCHEMA,
    fit_evaluator,
    measure_report,
    run_exp1,
    run_exp3,
    sample_evaluator,
)
from .hmc import ConvergenceError, InsufficientDrawsError
from .io import (
    IngestionError,
    PairedDataset,
    aggregate_human_frequency,
    dumps_report,
    load_annotations,
    load_labels,
    load_pairs,
    save_labels,
    save_pairs,
    save_report,
    save_tensor,
    load_tensor,
    validate_report,
)
from .report import write_svg
from .simulation import SimConfig, SimulationError, simulate

EXIT_OK, EXIT_INPUT, EXIT_SAMPLING, EXIT_INTERNAL = 0, 2, 3, 4
MODEL_MAGIC = b"SEVM0001"

logger = logging.getLogger("simplex_eval")


class InputError(Exception):
    """Bad arguments or input files (exit code 2)."""


def _float_list(text):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _measure_list(text):
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in MEASURE_NAMES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown measures {bad}; choose from {MEASURE_NAMES}")
    return names


def _config(args, **flags):
    return merge_overrides(load_config(getattr(args, "config", None)), **flags)


# ---------------------------------------------------------------- commands


def cmd_aggregate(args):
    ann = load_annotations(args.annotations, args.k)
    rows = aggregate_human_frequency(ann)
    save_labels(args.out, [sid for sid, _ in rows], np.array([v for _, v in rows]))
    logger.info("wrote %d labels (%d invalid annotations dropped)", len(rows), ann.dropped)


def cmd_simulate(args):
    cfg = SimConfig(
        alpha=args.alpha, n_train=args.n_train, n_test=args.n_test,
        noise_var=args.noise_var, seed=args.seed,
    )
    ds = simulate(cfg)
    save_pairs(args.out, PairedDataset(ds.sample_ids, ds.splits, ds.labels, ds.predictions))


def save_model(path, model, meta):
    with Path(path).open("wb") as fh:
        fh.write(MODEL_MAGIC)
        pickle.dump({"meta": meta, "model": model}, fh, protocol=pickle.HIGHEST_PROTOCOL)


def load_model(path):
    with Path(path).open("rb") as fh:
        if fh.read(len(MODEL_MAGIC)) != MODEL_MAGIC:
            raise InputError(f"{path}: not a model file")
        return pickle.load(fh)


def cmd_fit(args):
    cfg = _config(args, evaluator=args.evaluator, seed=args.seed, draws=args.draws)
    data = load_pairs(args.pairs)
    if args.split:
        data = data.split(args.split)
        if len(data) == 0:
            raise InputError(f"no rows with split {args.split!r}")
    model = fit_evaluator(cfg["evaluator"], cfg, data)
    meta = {"evaluator": cfg["evaluator"], "config": cfg, "version": __version__}
    save_model(args.out, model, meta)
    diag = getattr(model, "diagnostics_", None)
    if diag is not None:
        path = args.diagnostics or f"{args.out}.diagnostics.json"
        slim = {k: v for k, v in diag.items() if k != "logp_traces"}
        Path(path).write_text(dumps_report(slim), encoding="utf-8")


def cmd_sample(args):
    saved = load_model(args.model)
    ids, labels = load_labels(args.labels)
    splits = None
    if saved["meta"]["config"]["per_split"]:
        splits = load_pairs(args.labels).splits
    seed = args.seed if args.seed is not None else saved["meta"]["config"]["seed"]
    samples = sample_evaluator(saved["model"], labels, args.draws, splits, seed)
    save_tensor(args.out, samples)


def cmd_measure(args):
    cfg = _config(args, measures=args.measures, mass=args.mass)
    samples = load_tensor(args.tensor)
    path = Path(args.labels)
    ids, labels = load_labels(path)
    splits = reference = None
    try:
        pairs = load_pairs(path)
    except IngestionError:
        pairs = None
    if pairs is not None:
        splits = pairs.splits
        if args.reference == "predictions":
            reference = pairs.predictions
    elif args.reference == "predictions":
        raise InputError("--reference predictions needs a pairs file for --labels")
    if samples.shape[0] != labels.shape[0] or samples.shape[2] != labels.shape[1]:
        raise InputError(f"tensor shape {samples.shape} does not match {labels.shape[0]} labels "
                         f"with {labels.shape[1]} classes")
    report = measure_report(samples, labels, cfg["measures"], cfg["mass"], cfg["bins"],
                            splits, reference)
    save_report(args.out, report)
    if args.plots:
        plots = Path(args.plots)
        plots.mkdir(parents=True, exist_ok=True)
        for tag, records in report["splits"].items():
            for rec in records:
                write_svg(plots / f"{tag}_{rec['measure_name']}.svg", rec, f"{rec['measure_name']} ({tag})")


def cmd_exp1(args):
    cfg = _config(args, seed=args.seed, draws=args.draws,
                  evaluators=args.evaluators.split(",") if args.evaluators else None)
    report = run_exp1(load_pairs(args.pairs), cfg)
    save_report(args.out, report, EXP1_SCHEMA)
    for tag, order in report["ranking"].items():
        logger.info("ranking (%s half): %s", tag, ", ".join(order) or "none")


def cmd_exp3(args):
    cfg = _config(args, evaluator=args.evaluator, seed=args.seed, draws=args.draws,
                  measures=args.measures, mass=args.mass)
    datasets = [(Path(p).stem, load_pairs(p)) for p in args.pairs]
    names = [n for n, _ in datasets]
    if len(set(names)) != len(names):
        raise InputError("pairs files must have distinct names")
    report = run_exp3(datasets, cfg)
    for rep in report["checkpoints"].values():
        validate_report(rep)
    Path(args.out).write_text(dumps_report(report), encoding="utf-8")


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="simplex-eval", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("aggregate", help="human-frequency labels from annotations")
    s.add_argument("--annotations", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_aggregate)

    s = sub.add_parser("simulate", help="Dirichlet labels with a noisy-identity predictor")
    s.add_argument("--alpha", type=_float_list, default=(10.0, 10.0, 10.0))
    s.add_argument("--n-train", type=int, default=1000)
    s.add_argument("--n-test", type=int, default=1000)
    s.add_argument("--noise-var", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", help="fit an evaluator on a pairs file")
    s.add_argument("--pairs", required=True)
    s.add_argument("--evaluator", choices=EVALUATORS)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--draws", type=int, help="weight sets kept by the bnn evaluator")
    s.add_argument("--split", choices=("train", "test"), help="fit on one split only")
    s.add_argument("--diagnostics", help="where to write HMC diagnostics (bnn)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("sample", help="draw predictions for labels from a fitted model")
    s.add_argument("--model", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--draws", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("measure", help="measure distributions of a sample tensor")
    s.add_argument("--tensor", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--measures", type=_measure_list)
    s.add_argument("--mass", type=float)
    s.add_argument("--reference", choices=("labels", "predictions"), default="labels")
    s.add_argument("--config")
    s.add_argument("--plots")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_measure)

    s = sub.add_parser("exp1", help="rank all evaluators on shuffled halves")
    s.add_argument("--pairs", required=True)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--draws", type=int)
    s.add_argument("--evaluators", help="comma-separated subset of " + ",".join(EVALUATORS))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_exp1)

    s = sub.add_parser("exp3", help="measure one evaluator over several checkpoints")
    s.add_argument("--pairs", nargs="+", required=True)
    s.add_argument("--evaluator", choices=EVALUATORS)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--draws", type=int)
    s.add_argument("--measures", type=_measure_list)
    s.add_argument("--mass", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_exp3)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConvergenceError, ResamplingTimeoutError, InsufficientDrawsError, SimulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SAMPLING
    except jsonschema.ValidationError as exc:
        print(f"error: invalid configuration: {exc.message}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, IngestionError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - invariant violations
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
