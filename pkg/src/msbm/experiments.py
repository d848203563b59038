"""Desk-scale experiment grids.

A config is an INI file::

    [experiment]
    name = err-decay
    preset = five-community      ; or give P and Q0 under [model]
    n = 40, 80, 120, 160
    alpha = 1.0
    seeds = 0-9                  ; ranges and comma lists
    output = results/err-decay

    [model]                      ; optional, overrides the preset
    P = 0.2 0.8; 0.6 0.4
    Q0 = 0.8 0.2; 0.1 0.3
    ordered = true

    [options]                    ; experiment specific, see EXPERIMENTS
    K = 5

Each replicate writes rows ``experiment,seed,n,alpha,metric,value,wall_time``
to ``results.csv``; ``summary.json`` holds per-cell means and deviations.
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import collab, estimators, hmm, inference, prediction, sdp
from .errors import ConfigError, MsbmError
from .model import Labeling, ModelParams, best_permutation, misclassification, sample_graph
from .presets import preset

log = logging.getLogger(__name__)

CSV_SCHEMA = ("experiment", "seed", "n", "alpha", "metric", "value", "wall_time")
SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    name: str
    n: tuple
    alpha: tuple
    seeds: tuple
    params: ModelParams
    output: Path | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.name!r}; choose from {sorted(EXPERIMENTS)}")
        if not self.n or not self.alpha or not self.seeds:
            raise ConfigError("n, alpha and seeds must be non-empty")
        self.n = tuple(int(v) for v in self.n)
        self.alpha = tuple(float(v) for v in self.alpha)
        self.seeds = tuple(int(v) for v in self.seeds)

    def option(self, key: str, default=None, cast=float):
        if key not in self.options:
            return default
        value = self.options[key]
        return cast(value) if not isinstance(value, (list, tuple)) else value


@dataclass
class ExperimentReport:
    rows: list
    summary: dict

    def metric(self, name: str, n=None, alpha=None) -> np.ndarray:
        return np.array(
            [
                r["value"]
                for r in self.rows
                if r["metric"] == name and (n is None or r["n"] == n) and (alpha is None or r["alpha"] == alpha)
            ],
            dtype=float,
        )


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _float_list(text: str) -> list[float]:
    text = text.strip()
    if text.startswith("logspace(") and text.endswith(")"):
        lo, hi, num = (float(v) for v in text[9:-1].split(","))
        if lo <= 0 or hi <= 0:
            raise ValueError(f"logspace endpoints must be positive, got {lo}, {hi}")
        return list(np.logspace(np.log10(lo), np.log10(hi), int(num)))
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _matrix(text: str) -> np.ndarray:
    return np.array([[float(v) for v in row.split()] for row in text.split(";") if row.strip()])


def load_config(path) -> ExperimentConfig:
    """Parse an INI experiment config; relative paths resolve against its folder."""
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    if not cp.read(path):
        raise ConfigError(f"cannot read config {path}")
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section")
    ex = cp["experiment"]
    try:
        name = ex["name"].strip()
        n = _int_list(ex["n"])
        alpha = _float_list(ex.get("alpha", "1.0"))
        seeds = _int_list(ex["seeds"])
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if "model" in cp and ("P" in cp["model"] or "params_file" in cp["model"]):
        model = cp["model"]
        if "params_file" in model:
            from .io import read_params

            ref = path.parent / model["params_file"]
            if not ref.exists():
                raise ConfigError(f"params file {ref} does not exist")
            params = read_params(ref)
        else:
            ordered = model.get("ordered", "false").strip().lower() in ("1", "true", "yes")
            params = ModelParams.from_chain(_matrix(model["P"]), _matrix(model["Q0"]), 1.0, ordered)
    elif "preset" in ex:
        params = preset(ex["preset"].strip())
    else:
        raise ConfigError("give either a preset or a [model] section")
    output = ex.get("output")
    options = dict(cp["options"]) if "options" in cp else {}
    return ExperimentConfig(
        name, tuple(n), tuple(alpha), tuple(seeds), params, (path.parent / output) if output else None, options
    )


def sub_seed(seed: int, cell: str, replicate: int = 0) -> np.random.SeedSequence:
    """Seed for one replicate, derived from ``(seed, cell, replicate)`` only."""
    return np.random.SeedSequence([int(seed), zlib.crc32(cell.encode()), int(replicate)])


def compute_precision_recall(est: Labeling, truth: Labeling, positive: int):
    """Precision and recall of community ``positive`` after aligning ``est`` to ``truth``.

    Undefined ratios (0/0) are returned as ``None``.
    """
    sigma = best_permutation(est, truth)
    aligned = sigma[est.labels]
    pred = aligned == positive
    real = truth.labels == positive
    hit = int(np.sum(pred & real))
    precision = hit / int(pred.sum()) if pred.any() else None
    recall = hit / int(real.sum()) if real.any() else None
    return precision, recall


MAX_REDRAWS = 100


def draw_nonvoid(params: ModelParams, n: int, ss: np.random.SeedSequence):
    """Sample until every community is non-empty, as the error metric requires.

    Redraws use children of ``ss``, so the result depends on ``ss`` alone.
    """
    if n < params.K:
        raise ConfigError(f"n={n} cannot hold {params.K} non-empty communities")
    g, labels = sample_graph(params, n, ss)
    for child in ss.spawn(MAX_REDRAWS):
        if np.all(labels.counts() > 0):
            return g, labels
        g, labels = sample_graph(params, n, child)
    if np.all(labels.counts() > 0):
        return g, labels
    raise ConfigError(f"no draw with all {params.K} communities in {MAX_REDRAWS} tries at n={n}")


# each experiment maps (config, params at this alpha, n, seed sequence) -> list of (metric, value)


def _convergence_p(cfg, params, n, ss):
    _, labels = sample_graph(params, n, ss)
    P_hat = estimators.estimate_P(labels)
    return [("linf_P", float(np.nanmax(np.abs(P_hat - params.P))) if not np.isnan(P_hat).all() else np.nan)]


def _err_decay(cfg, params, n, ss):
    draw, clus = ss.spawn(2)
    g, labels = draw_nonvoid(params, n, draw)
    res = sdp.cluster(g, int(cfg.option("K", params.K)), seed=clus)
    return [("err", misclassification(res.labels, labels))]


def _precision_recall(cfg, params, n, ss):
    draw, clus = ss.spawn(2)
    g, labels = draw_nonvoid(params, n, draw)
    res = sdp.cluster(g, params.K, seed=clus)
    positive = int(cfg.option("positive", 1, int)) - 1
    precision, recall = compute_precision_recall(res.labels, labels, positive)
    return [
        ("precision", precision),
        ("recall", recall),
        ("err", misclassification(res.labels, labels)),
    ]


def _hypo_power(cfg, params, n, ss):
    draw, test = ss.spawn(2)
    K = params.K
    pi0 = np.asarray(cfg.option("pi0", None, _float_list) or params.pi, dtype=float)
    if str(cfg.options.get("null", "false")).lower() in ("1", "true", "yes"):
        params = ModelParams(K, np.tile(pi0, (K, 1)), pi0, params.alpha, params.Q0, params.ordered)
    g, _ = sample_graph(params, n, draw)
    rep = inference.markov_test(
        g,
        K,
        pi0,
        level=cfg.option("level", inference.DEFAULT_LEVEL),
        mc=int(cfg.option("mc", inference.MIN_MC, int)),
        seed=test,
    )
    return [("reject", float(rep.reject)), ("statistic", rep.statistic), ("threshold", rep.threshold)]


def _link_l1(cfg, params, n, ss):
    draw, clus = ss.spawn(2)
    g, labels = draw_nonvoid(params, n, draw)
    lab = sdp.cluster(g, params.K, seed=clus).labels
    est = estimators.estimate(g, lab)
    theta = hmm.baum_welch(lab)
    eta = prediction.eta_true(params, labels)
    plug = prediction.msbm_classify(est, lab).eta
    rel = prediction.reliable_classify(theta, est, lab).eta
    return [
        ("l1_plugin", float(np.mean(np.abs(plug - eta)))),
        ("l1_reliable", float(np.mean(np.abs(rel - eta)))),
        ("err", misclassification(lab, labels)),
    ]


def _collab_sweep(cfg, params, n, ss):
    m = int(cfg.option("m", 100, int))
    sizes = [int(v) for v in _int_list(str(cfg.options.get("sizes", "1,2,5,10,26")))]
    queries = int(cfg.option("queries", 1, int))
    prior = str(cfg.options.get("prior", "marginal")).strip()
    draw, clus, qs = ss.spawn(3)
    g, truth = draw_nonvoid(params, m, draw)
    lab = sdp.cluster(g, params.K, seed=clus).labels
    est = estimators.estimate(g, lab)
    theta = hmm.baum_welch(lab)
    sigma = best_permutation(lab, truth)
    rng = np.random.default_rng(qs)
    step = np.linalg.matrix_power(params.P, n - m)
    errors = {(rule, s): 0 for rule in ("optimal", "plugin", "reliable") for s in sizes}
    Q = params.Q
    for _ in range(queries):
        cn = int(rng.choice(params.K, p=step[truth.labels[-1]]))
        x_all = (rng.random(m) < Q[truth.labels, cn]).astype(int)
        for s in sizes:
            q = collab.FilterQuery.last_nodes(m, n, s, x_all[m - s:])
            errors["optimal", s] += collab.map_optimal(params, truth, q) != cn
            errors["plugin", s] += sigma[collab.map_plugin(est, lab, q)] != cn
            errors["reliable", s] += sigma[collab.map_reliable(theta, est, lab, q, prior)] != cn
    return [(f"error_{rule}@{s}", v / queries) for (rule, s), v in errors.items()]


def _select_k(cfg, params, n, ss):
    draw, sel = ss.spawn(2)
    g, _ = sample_graph(params, n, draw)
    tr = inference.select_k(g, int(cfg.option("kmin", 2, int)), int(cfg.option("kmax", 7, int)), seed=sel)
    return [("K_hat", float(tr.K_hat))] + [(f"M@{K}", float(v)) for K, v in zip(tr.K_values, tr.M)]


EXPERIMENTS: dict[str, Callable] = {
    "convergence-P": _convergence_p,
    "err-decay": _err_decay,
    "precision-recall-sparsity": _precision_recall,
    "hypo-power": _hypo_power,
    "link-l1": _link_l1,
    "collab-sweep": _collab_sweep,
    "select-k": _select_k,
}


def _summarise(cfg: ExperimentConfig, rows: list) -> dict:
    cells = {}
    for r in rows:
        key = (r["n"], r["alpha"], r["metric"])
        cells.setdefault(key, []).append(r["value"])
    out = []
    for (n, alpha, metric), vals in sorted(cells.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        arr = np.array([np.nan if v is None else v for v in vals], dtype=float)
        ok = arr[~np.isnan(arr)]
        out.append(
            {
                "n": n,
                "alpha": alpha,
                "metric": metric,
                "count": int(arr.size),
                "missing": int(arr.size - ok.size),
                "mean": float(ok.mean()) if ok.size else None,
                "std": float(ok.std(ddof=1)) if ok.size > 1 else None,
            }
        )
    summary = {"experiment": cfg.name, "schema_version": SCHEMA_VERSION, "cells": out}
    if cfg.name == "convergence-P":
        summary["loglog_slope"] = loglog_slope(rows, "linf_P")
    return summary


def loglog_slope(rows: list, metric: str) -> float | None:
    """Least-squares slope of log(mean metric) against log n over the grid."""
    by_n = {}
    for r in rows:
        if r["metric"] == metric and r["value"] is not None and np.isfinite(r["value"]):
            by_n.setdefault(r["n"], []).append(r["value"])
    if len(by_n) < 2:
        return None
    ns = np.array(sorted(by_n), dtype=float)
    means = np.array([np.mean(by_n[k]) for k in sorted(by_n)])
    return float(np.polyfit(np.log(ns), np.log(means), 1)[0])


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Run every (n, alpha, seed) cell; failures become rows, never abort the grid."""
    fn = EXPERIMENTS[cfg.name]
    rows = []
    for n in cfg.n:
        for alpha in cfg.alpha:
            params = cfg.params.with_alpha(alpha)
            cell = f"{cfg.name}|n={n}|alpha={alpha!r}"
            for seed in cfg.seeds:
                t0 = time.perf_counter()
                try:
                    metrics = fn(cfg, params, n, sub_seed(seed, cell))
                except MsbmError as exc:
                    log.warning("%s seed=%d failed: %s", cell, seed, exc)
                    metrics = [(f"failed:{type(exc).__name__}", None)]
                wall = time.perf_counter() - t0
                for metric, value in metrics:
                    rows.append(
                        {
                            "experiment": cfg.name,
                            "seed": seed,
                            "n": n,
                            "alpha": alpha,
                            "metric": metric,
                            "value": None if value is None else float(value),
                            "wall_time": wall,
                        }
                    )
    report = ExperimentReport(rows, _summarise(cfg, rows))
    if write and cfg.output is not None:
        write_report(report, cfg.output)
    return report


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report(report: ExperimentReport, out_dir, timing: bool = True) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_SCHEMA)
        for r in report.rows:
            row = dict(r)
            if not timing:
                row["wall_time"] = 0.0
            w.writerow([_fmt(row[k]) for k in CSV_SCHEMA])
    (out_dir / "summary.json").write_text(json.dumps(report.summary, indent=2, sort_keys=True) + "\n")
