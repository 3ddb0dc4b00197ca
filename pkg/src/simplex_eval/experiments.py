"""Experiment pipelines shared by the command-line interface."""

from __future__ import annotations

import logging

import numpy as np

from .config import EVALUATORS, hmc_config
from .evaluators import (
    BNNEvaluator,
    MLEDirichletEvaluator,
    NDoDEvaluator,
    PerSplitEvaluator,
    ResamplingTimeoutError,
    UniformDirichletEvaluator,
)
from .hmc import ConvergenceError, InsufficientDrawsError
from .io import MEASURE_RECORD_SCHEMA, split_half_shuffled
from .measures import compute_measure
from .report import measure_record

logger = logging.getLogger(__name__)

# errors that mark a single evaluator as failed without aborting a run
EVALUATOR_FAILURES = (ConvergenceError, ResamplingTimeoutError, InsufficientDrawsError)


def make_evaluator(name, cfg, seed=None):
    """Build an unfitted evaluator from a run configuration."""
    seed = cfg["seed"] if seed is None else seed
    draws = cfg["draws"]
    if name == "uniform":
        return UniformDirichletEvaluator(n_draws=draws, random_state=seed)
    if name == "mle-dirichlet":
        return MLEDirichletEvaluator(**cfg["mle"], n_draws=draws, random_state=seed)
    if name in ("ndod", "ndod-zero"):
        return NDoDEvaluator(
            zero_mean=name == "ndod-zero",
            max_attempts=cfg["ndod"]["max_attempts"],
            n_draws=draws,
            random_state=seed,
        )
    if name == "bnn":
        return BNNEvaluator(
            **cfg["bnn"], hmc=hmc_config(cfg), n_draws=draws, random_state=seed
        )
    raise ValueError(f"unknown evaluator {name!r}; choose from {EVALUATORS}")


def evaluator_seeds(seed, names):
    """Independent integer seeds per evaluator, stable under reordering.

    Each name maps to a fixed index in the canonical evaluator list, so
    dropping an evaluator from a run does not change the others' streams.
    """
    children = np.random.SeedSequence(seed).spawn(len(EVALUATORS))
    return {n: int(children[EVALUATORS.index(n)].generate_state(1)[0]) for n in names}


def fit_evaluator(name, cfg, data, seed=None):
    est = make_evaluator(name, cfg, seed)
    if cfg["per_split"]:
        return PerSplitEvaluator(est).fit(data.labels, data.predictions, data.splits)
    return est.fit(data.labels, data.predictions)


def sample_evaluator(model, labels, draws=None, splits=None, seed=None):
    if isinstance(model, PerSplitEvaluator):
        if splits is None:
            raise ValueError("a per-split model needs split tags for the labels")
        return model.sample(labels, splits, draws, seed)
    return model.sample(labels, draws, seed)


def measure_report(samples, labels, measures, mass, bins, splits=None, reference=None):
    """Per-split measure records: ``{"splits": {tag: [record, ...]}}``."""
    n = samples.shape[0]
    splits = np.full(n, "all", dtype=object) if splits is None else np.asarray(splits, dtype=object)
    out = {}
    for tag in sorted(set(splits.tolist())):
        idx = np.flatnonzero(splits == tag)
        ref = None if reference is None else reference[idx]
        out[tag] = [
            measure_record(
                compute_measure(m, labels[idx], samples[idx], ref).values, m, mass, bins
            )
            for m in measures
        ]
    return {"splits": out}


def _bnn_summary(diag):
    keep = (
        "iterations", "step_sizes", "acceptance_rates", "divergences", "slopes",
        "slope_threshold", "window", "window_means", "pooled_std", "spread",
        "converged", "lag", "burn_in", "chain_lags",
    )
    return {k: diag[k] for k in keep if k in diag}


def run_exp1(data, cfg):
    """Fit every evaluator on one shuffled half, score both halves.

    The score is the normalized Euclidean distance from every evaluator draw
    to the actual predictor output of the same sample; evaluators are ranked
    per half by the upper bound of its right-tailed interval.
    """
    names = list(cfg["evaluators"])
    fit_half, eval_half = split_half_shuffled(data, cfg["seed"])
    halves = {"fit": fit_half, "eval": eval_half}
    seeds = evaluator_seeds(cfg["seed"], names)
    results = {}
    for name in names:
        logger.info("exp1: fitting %s", name)
        entry = {"status": "succeeded", "error": None, "halves": {}}
        try:
            est = make_evaluator(name, cfg, seeds[name]).fit(fit_half.labels, fit_half.predictions)
            if name == "bnn":
                entry["diagnostics"] = _bnn_summary(est.diagnostics_)
            for i, (tag, half) in enumerate(halves.items()):
                draws = est.sample(half.labels, cfg["draws"], seeds[name] + 1 + i)
                dist = compute_measure("l2", half.labels, draws, half.predictions)
                entry["halves"][tag] = measure_record(dist.values, "normalized_euclidean",
                                                      cfg["mass"], cfg["bins"])
        except EVALUATOR_FAILURES as exc:
            logger.warning("exp1: %s failed: %s", name, exc)
            entry = {"status": "failed", "error": f"{type(exc).__name__}: {exc}", "halves": {}}
            diag = getattr(exc, "diagnostics", None)
            if diag:
                entry["diagnostics"] = _bnn_summary(diag)
        results[name] = entry

    ranking = {}
    for tag in halves:
        ok = [n for n in names if results[n]["status"] == "succeeded"]
        ranking[tag] = sorted(ok, key=lambda n: (results[n]["halves"][tag]["rtci"]["upper"], n))
    return {
        "experiment": "exp1",
        "seed": cfg["seed"],
        "mass": cfg["mass"],
        "draws": cfg["draws"],
        "n_fit": len(fit_half),
        "n_eval": len(eval_half),
        "evaluators": results,
        "ranking": ranking,
    }


def run_exp3(datasets, cfg):
    """Measure one evaluator per checkpoint's pairs file against its labels.

    ``datasets`` is a list of ``(name, PairedDataset)``; each is fitted and
    reported per split independently.
    """
    out = {}
    for name, data in datasets:
        logger.info("exp3: %s", name)
        model = fit_evaluator(cfg["evaluator"], cfg, data)
        samples = sample_evaluator(model, data.labels, cfg["draws"], data.splits)
        out[name] = measure_report(
            samples, data.labels, cfg["measures"], cfg["mass"], cfg["bins"], data.splits
        )
    return {"experiment": "exp3", "evaluator": cfg["evaluator"], "checkpoints": out}


EXP1_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["experiment", "evaluators", "ranking"],
    "properties": {
        "experiment": {"const": "exp1"},
        "evaluators": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["status", "error", "halves"],
                "properties": {
                    "status": {"enum": ["succeeded", "failed"]},
                    "error": {"type": ["string", "null"]},
                    "halves": {"type": "object", "additionalProperties": MEASURE_RECORD_SCHEMA},
                },
            },
        },
        "ranking": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": {"type": "string"}},
        },
    },
}
