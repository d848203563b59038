"""``msbm`` command line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import collab, estimators, hmm, inference, prediction, sdp
from . import io as fio
from .errors import InputError, MsbmError
from .experiments import load_config, run_experiment, write_report
from .model import Labeling, sample_graph
from .presets import PRESETS, preset


def _emit(obj, out) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _K_from(args, header_K: int) -> int:
    K = args.k or header_K
    if not K:
        raise InputError("K not given on the command line nor in the graph header")
    return K


def cmd_run(args):
    cfg = load_config(args.config)
    if args.out:
        cfg.output = Path(args.out)
    report = run_experiment(cfg, write=False)
    if cfg.output is None:
        raise InputError("no output directory: set 'output' in the config or pass --out")
    write_report(report, cfg.output, timing=not args.no_timing)
    print(f"wrote {len(report.rows)} rows to {cfg.output / 'results.csv'}")


def cmd_sample(args):
    if args.params:
        params = fio.read_params(args.params).with_alpha(args.alpha) if args.alpha else fio.read_params(args.params)
    else:
        params = preset(args.preset, args.alpha or 1.0)
    g, labels = sample_graph(params, args.n, args.seed)
    fio.write_graph(args.out, g, params.K)
    if args.labels_out:
        fio.write_labels(args.labels_out, labels)


def cmd_cluster(args):
    g, hK = fio.read_graph(args.graph)
    K = _K_from(args, hK)
    res = sdp.cluster(g, K, seed=args.seed, beta=args.beta, tol=args.tol, psd=not args.no_psd, opt_tol=args.opt_tol)
    fio.write_labels(args.out, res.labels)
    diag = {"objective": None, "residuals": None, "iterations": 0, "assignment_cost": res.assignment_cost}
    if res.relaxed is not None:
        diag.update(
            objective=res.relaxed.objective, residuals=res.relaxed.residuals, iterations=res.relaxed.iterations
        )
    line = json.dumps(diag, sort_keys=True)
    if args.diagnostics:
        Path(args.diagnostics).write_text(line + "\n")
    else:
        print(line)


def cmd_estimate(args):
    g, hK = fio.read_graph(args.graph)
    labels = fio.read_labels(args.labels, args.k or hK or None)
    fio.write_estimates(args.out, estimators.estimate(g, labels))


def _parse_gap(text):
    if not text:
        return None
    T, n_start, delta = (int(v) for v in text.split(","))
    return hmm.GapSpec(T, n_start, delta)


def cmd_hmm_fit(args):
    labels = fio.read_labels(args.labels, args.k)
    theta = hmm.baum_welch(
        labels, gap=_parse_gap(args.gap), epsilon=args.epsilon, max_iter=args.max_iter, tol=args.tol
    )
    fio.write_theta(args.out, theta)


def _write_scores(path, scores: prediction.LinkScores) -> None:
    lines = ["node,eta,decision"]
    lines += [f"{i + 1},{float(e)!r},{int(d)}" for i, (e, d) in enumerate(zip(scores.eta, scores.decisions))]
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_predict_link(args):
    g, hK = fio.read_graph(args.graph)
    K = _K_from(args, hK)
    if args.method == "oracle":
        if not (args.params and args.truth):
            raise InputError("--method oracle needs --params and --truth")
        params = fio.read_params(args.params)
        truth = fio.read_labels(args.truth, params.K)
        scores = prediction.LinkScores.from_scores(prediction.eta_true(params, truth))
    else:
        labels = sdp.cluster(g, K, seed=args.seed).labels
        est = estimators.estimate(g, labels)
        if args.method == "plugin":
            scores = prediction.msbm_classify(est, labels)
        else:
            scores = prediction.reliable_classify(hmm.baum_welch(labels), est, labels)
    _write_scores(args.out, scores)


def _read_obs(path):
    pairs = []
    for ln in Path(path).read_text().splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#") or ln.lower().startswith("i,"):
            continue
        i, x = ln.split(",")
        pairs.append((int(i) - 1, int(x)))
    pairs.sort()
    return tuple(p[0] for p in pairs), tuple(p[1] for p in pairs)


def cmd_collab_filter(args):
    g, hK = fio.read_graph(args.graph)
    K = _K_from(args, hK)
    if g.n < args.m:
        raise InputError(f"graph has {g.n} nodes, fewer than m={args.m}")
    prefix = g.subgraph(range(args.m))
    E, x = _read_obs(args.obs)
    q = collab.FilterQuery(args.m, args.n, E, x)
    if args.method == "optimal":
        if not (args.params and args.truth):
            raise InputError("--method optimal needs --params and --truth")
        params = fio.read_params(args.params)
        truth = fio.read_labels(args.truth, params.K)
        truth = Labeling(truth.labels[: args.m], params.K)
        scores = collab.optimal_scores(params, truth, q)
    else:
        labels = sdp.cluster(prefix, K, seed=args.seed).labels
        est = estimators.estimate(prefix, labels)
        if args.method == "plugin":
            scores = collab.plugin_scores(est, labels, q)
        else:
            scores = collab.reliable_scores(hmm.baum_welch(labels), est, labels, q, args.prior)
    post = collab.normalize(scores)
    _emit({"community": int(np.argmax(scores)) + 1, "posterior": [float(v) for v in post]}, args.out)


def cmd_test_markov(args):
    g, hK = fio.read_graph(args.graph)
    K = _K_from(args, hK)
    pi0 = [float(v) for v in args.pi0.split(",")]
    rep = inference.markov_test(g, K, pi0, level=args.level, mc=args.mc, seed=args.seed)
    _emit(
        {
            "statistic": rep.statistic,
            "threshold": rep.threshold,
            "asymptotic_threshold": rep.asymptotic_threshold,
            "mc_replicates": rep.mc_replicates,
            "failures": rep.failures,
            "level": rep.level,
            "decision": rep.decision,
            "p_value": rep.p_value,
        },
        args.out,
    )


def cmd_select_k(args):
    g, _ = fio.read_graph(args.graph)
    tr = inference.select_k(g, args.kmin, args.kmax, seed=args.seed)
    _emit(
        {"K_values": [int(k) for k in tr.K_values], "M": [float(v) for v in tr.M], "K_hat": tr.K_hat},
        args.out,
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="msbm", description="Markov stochastic block model toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="run an experiment config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="override the output directory")
    s.add_argument("--no-timing", action="store_true", help="write wall_time as 0 for byte-stable output")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sample", help="sample a graph from a preset or params file")
    s.add_argument("--preset", choices=sorted(PRESETS), default="four-community")
    s.add_argument("--params")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--alpha", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--labels-out")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("cluster", help="relaxed K-means plus K-medoids")
    s.add_argument("--graph", required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--beta", type=float)
    s.add_argument("--tol", type=float, default=sdp.DEFAULT_TOL)
    s.add_argument("--opt-tol", type=float, default=sdp.CLUSTER_OPT_TOL, help="ADMM stopping tolerance")
    s.add_argument("--no-psd", action="store_true", help="drop the semidefinite constraint")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--diagnostics", help="write the JSON diagnostics line here instead of stdout")
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("estimate", help="estimate Q, pi and P from a labeling")
    s.add_argument("--graph", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("hmm-fit", help="Baum-Welch on a label sequence")
    s.add_argument("--labels", required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--gap", help="T,n_start,delta (1-based)")
    s.add_argument("--epsilon", type=float, default=hmm.DEFAULT_EPSILON)
    s.add_argument("--max-iter", type=int, default=hmm.DEFAULT_MAX_ITER)
    s.add_argument("--tol", type=float, default=hmm.DEFAULT_TOL)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_hmm_fit)

    s = sub.add_parser("predict-link", help="edge scores for the next node")
    s.add_argument("--graph", required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--method", choices=("plugin", "reliable", "oracle"), default="reliable")
    s.add_argument("--params")
    s.add_argument("--truth")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict_link)

    s = sub.add_parser("collab-filter", help="community of a late node from partial edges")
    s.add_argument("--graph", required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--obs", required=True, help="CSV of 'i,x' pairs, i 1-based in 1..m")
    s.add_argument("--method", choices=("optimal", "plugin", "reliable"), default="reliable")
    s.add_argument("--prior", choices=("marginal", "chained"), default="marginal")
    s.add_argument("--params")
    s.add_argument("--truth")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_collab_filter)

    s = sub.add_parser("test-markov", help="Monte Carlo test of Markov arrivals")
    s.add_argument("--graph", required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--pi0", required=True, help="comma separated null distribution")
    s.add_argument("--level", type=float, default=inference.DEFAULT_LEVEL)
    s.add_argument("--mc", type=int, default=inference.DEFAULT_MC)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_test_markov)

    s = sub.add_parser("select-k", help="choose K from emission jumps")
    s.add_argument("--graph", required=True)
    s.add_argument("--kmin", type=int, default=2)
    s.add_argument("--kmax", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_select_k)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except MsbmError as exc:
        print(f"msbm: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
