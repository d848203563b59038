"""Plain-text file formats.

* graph: first line ``n K``, then one ``i j`` line per edge (1-based, ``i < j``)
* labels: one 1-based community per line
* points: CSV with header ``timestamp,lat,lon,class``
* estimates / HMM: JSON envelopes whose matrices are row-major CSV blocks;
  undefined entries are written as ``nan``
"""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .errors import InputError
from .estimators import EstimatedParams
from .hmm import HmmState
from .model import Labeling, ModelParams, OrderedGraph, Point

ESTIMATES_FORMAT = "msbm-estimates/1"
THETA_FORMAT = "msbm-hmm/1"
PARAMS_FORMAT = "msbm-params/1"


def write_graph(path, graph: OrderedGraph, K: int = 0) -> None:
    lines = [f"{graph.n} {K}"]
    lines += [f"{i + 1} {j + 1}" for i, j in graph.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path) -> tuple[OrderedGraph, int]:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or len(rows[0]) not in (1, 2):
        raise InputError(f"{path}: first line must be 'n K'")
    try:
        n = int(rows[0][0])
        K = int(rows[0][1]) if len(rows[0]) == 2 else 0
        edges = [(int(a) - 1, int(b) - 1) for a, b in rows[1:]]
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    for a, b in edges:
        if not (0 <= a < n and 0 <= b < n) or a == b:
            raise InputError(f"{path}: bad edge ({a + 1}, {b + 1}) for n={n}")
    return OrderedGraph.from_edges(n, edges), K


def write_labels(path, labels: Labeling) -> None:
    Path(path).write_text("".join(f"{c + 1}\n" for c in labels.labels))


def read_labels(path, K: int | None = None) -> Labeling:
    try:
        values = [int(ln) for ln in Path(path).read_text().split()]
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    arr = np.asarray(values, dtype=np.int64) - 1
    if arr.size and arr.min() < 0:
        raise InputError(f"{path}: labels are 1-based")
    K = K or (int(arr.max()) + 1 if arr.size else 1)
    return Labeling(arr, K)


def read_points(path) -> list[Point]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"timestamp", "lat", "lon", "class"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise InputError(f"{path}: header must contain {sorted(need)}")
        return [
            Point(float(r["timestamp"]), (float(r["lat"]), float(r["lon"])), r["class"])
            for r in reader
        ]


def matrix_to_csv(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    buf = _io.StringIO()
    for row in M:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def csv_to_matrix(text: str) -> np.ndarray:
    rows = [[float(v) for v in ln.split(",")] for ln in text.strip().splitlines()]
    return np.asarray(rows, dtype=float)


def _dump(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load(path, fmt: str) -> dict:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != fmt:
        raise InputError(f"{path}: expected format {fmt!r}, got {payload.get('format')!r}")
    return payload


def write_estimates(path, est: EstimatedParams) -> None:
    _dump(
        path,
        {
            "format": ESTIMATES_FORMAT,
            "K": est.K,
            "Q_hat": matrix_to_csv(est.Q_hat),
            "pi_hat": matrix_to_csv(est.pi_hat),
            "P_hat": matrix_to_csv(est.P_hat),
        },
    )


def read_estimates(path) -> EstimatedParams:
    p = _load(path, ESTIMATES_FORMAT)
    return EstimatedParams(csv_to_matrix(p["Q_hat"]), csv_to_matrix(p["pi_hat"])[0], csv_to_matrix(p["P_hat"]))


def write_theta(path, theta: HmmState) -> None:
    _dump(
        path,
        {
            "format": THETA_FORMAT,
            "K": theta.K,
            "P_tilde": matrix_to_csv(theta.P_tilde),
            "O": matrix_to_csv(theta.O),
            "mu": matrix_to_csv(theta.mu),
            "log_likelihood": list(theta.log_likelihood),
        },
    )


def read_theta(path) -> HmmState:
    p = _load(path, THETA_FORMAT)
    return HmmState(
        csv_to_matrix(p["P_tilde"]),
        csv_to_matrix(p["O"]),
        csv_to_matrix(p["mu"])[0],
        tuple(p.get("log_likelihood", ())),
    )


def write_params(path, params: ModelParams) -> None:
    _dump(
        path,
        {
            "format": PARAMS_FORMAT,
            "K": params.K,
            "P": matrix_to_csv(params.P),
            "pi": matrix_to_csv(params.pi),
            "alpha": params.alpha,
            "Q0": matrix_to_csv(params.Q0),
            "ordered": params.ordered,
        },
    )


def read_params(path) -> ModelParams:
    """Model parameters; ``pi`` defaults to the stationary law of ``P`` when omitted."""
    p = _load(path, PARAMS_FORMAT)
    P = csv_to_matrix(p["P"])
    Q0 = csv_to_matrix(p["Q0"])
    alpha = float(p.get("alpha", 1.0))
    ordered = bool(p.get("ordered", False))
    if "pi" not in p:
        return ModelParams.from_chain(P, Q0, alpha, ordered)
    return ModelParams(len(P), P, csv_to_matrix(p["pi"])[0], alpha, Q0, ordered)
