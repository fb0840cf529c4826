"""Dataset ingestion and persistence of measures, assignments and matrices.

Raw datasets are JSON lines, one item per line::

    {"points": [[x, y, ...], ...], "weights": [...], "label": "..."}

``weights`` may be omitted for uniform mass. Measure collections are JSON
(``{"measures": [{"support": [...], "mass": [...], "label": ...}]}``) or CSV
with a ``measure,node,mass`` header.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataIOError, ValidationError
from .graph import Graph
from .transport import Measure

__all__ = [
    "RawDataset",
    "load_dataset",
    "ingest",
    "nearest_centroid_assignment",
    "save_assignment",
    "load_assignment",
    "save_measures",
    "load_measures",
    "load_measure",
    "save_matrix",
    "load_matrix",
    "MEASURE_DRIFT",
]

#: loaders rescale measures whose total mass is within this of 1
MEASURE_DRIFT = 1e-9


@dataclass
class RawDataset:
    points: list
    weights: list
    labels: Optional[list] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.points) != len(self.weights):
            raise ValidationError("points and weights differ in item count")
        pts, wts = [], []
        for i, (p, w) in enumerate(zip(self.points, self.weights)):
            p = np.atleast_2d(np.asarray(p, dtype=float))
            if p.shape[0] == 0:
                raise ValidationError(f"item {i} has no points")
            w = np.ones(p.shape[0]) if w is None else np.asarray(w, dtype=float).reshape(-1)
            if w.shape[0] != p.shape[0]:
                raise ValidationError(f"item {i}: {p.shape[0]} points but {w.shape[0]} weights")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValidationError(f"item {i}: weights must be finite and nonnegative")
            pts.append(p)
            wts.append(w)
        self.points, self.weights = pts, wts

    def __len__(self):
        return len(self.points)

    def pooled_points(self) -> np.ndarray:
        """All item points stacked in item order (the assignment index space)."""
        return np.concatenate(self.points, axis=0)


def load_dataset(path) -> RawDataset:
    path = Path(path)
    points, weights, labels = [], [], []
    try:
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    points.append(rec["points"])
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ValidationError(f"{path}:{lineno}: bad record: {exc}") from exc
                weights.append(rec.get("weights"))
                labels.append(rec.get("label"))
    except OSError as exc:
        raise DataIOError(f"cannot read dataset {path}: {exc}") from exc
    if not points:
        raise ValidationError(f"{path}: dataset is empty")
    has_labels = any(lbl is not None for lbl in labels)
    return RawDataset(points, weights, labels if has_labels else None)


def nearest_centroid_assignment(points, graph: Graph) -> np.ndarray:
    """Nearest graph node for every point; ties go to the smallest node id."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != graph.nodes.shape[1]:
        raise ValidationError(
            f"points have dimension {pts.shape[1]}, graph nodes {graph.nodes.shape[1]}"
        )
    out = np.empty(pts.shape[0], dtype=np.int64)
    step = 4096
    for s in range(0, pts.shape[0], step):
        blk = pts[s : s + step]
        d2 = ((blk[:, None, :] - graph.nodes[None, :, :]) ** 2).sum(axis=2)
        out[s : s + step] = np.argmin(d2, axis=1)
    return out


def ingest(dataset: RawDataset, graph: Graph, assignment) -> list:
    """One normalized node measure per dataset item."""
    assignment = np.asarray(assignment, dtype=np.int64).reshape(-1)
    total = sum(p.shape[0] for p in dataset.points)
    if assignment.size != total:
        raise ValidationError(
            f"assignment covers {assignment.size} points, dataset has {total}"
        )
    if assignment.size and (assignment.min() < 0 or assignment.max() >= graph.n_nodes):
        raise ValidationError("assignment refers to a node outside the graph")
    measures = []
    offset = 0
    for i, w in enumerate(dataset.weights):
        nodes = assignment[offset : offset + w.size]
        offset += w.size
        try:
            measures.append(Measure.from_weights(nodes, w))
        except ValidationError as exc:
            raise ValidationError(f"item {i}: {exc}") from exc
    return measures


def save_assignment(assignment, path) -> None:
    _write_text(path, json.dumps({"assignment": [int(x) for x in assignment]}) + "\n")


def load_assignment(path) -> np.ndarray:
    data = _read_json(path)
    try:
        return np.asarray(data["assignment"], dtype=np.int64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed assignment file: {exc}") from exc


def _fmt(x: float) -> str:
    return "%.17g" % x


def save_measures(measures, path, labels=None) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        lines = ["measure,node,mass"]
        for i, m in enumerate(measures):
            lines += [f"{i},{int(n)},{_fmt(x)}" for n, x in zip(m.support, m.mass)]
        _write_text(path, "\n".join(lines) + "\n")
        return
    docs = []
    for i, m in enumerate(measures):
        doc = {"support": m.support.tolist(), "mass": m.mass.tolist()}
        if labels is not None:
            doc["label"] = labels[i]
        docs.append(doc)
    _write_text(path, json.dumps({"measures": docs}) + "\n")


def _measure_from_rows(nodes, masses, where):
    try:
        return Measure.from_weights(nodes, masses, max_drift=MEASURE_DRIFT)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def load_measures(path):
    """Read a measure collection; returns ``(measures, labels)``.

    Totals within ``MEASURE_DRIFT`` of 1 are renormalized, larger
    deviations rejected.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        groups: dict = {}
        for row in _read_csv(path):
            try:
                key, node, mass = row[0], int(row[1]), float(row[2])
            except (IndexError, ValueError) as exc:
                raise ValidationError(f"{path}: bad row {row!r}") from exc
            groups.setdefault(key, ([], []))
            groups[key][0].append(node)
            groups[key][1].append(mass)
        measures = [
            _measure_from_rows(n, w, f"{path} measure {k}") for k, (n, w) in groups.items()
        ]
        return measures, None
    data = _read_json(path)
    docs = data.get("measures") if isinstance(data, dict) else data
    if not isinstance(docs, list):
        raise ValidationError(f"{path}: expected a list of measures")
    measures, labels = [], []
    for i, doc in enumerate(docs):
        try:
            measures.append(_measure_from_rows(doc["support"], doc["mass"], f"{path} #{i}"))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path} #{i}: malformed measure: {exc}") from exc
        labels.append(doc.get("label"))
    return measures, (labels if any(lb is not None for lb in labels) else None)


def load_measure(path) -> Measure:
    """Read one measure from CSV rows ``node,mass`` or JSON."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        rows = _read_csv(path)
        try:
            nodes = [int(r[0]) for r in rows]
            masses = [float(r[1]) for r in rows]
        except (IndexError, ValueError) as exc:
            raise ValidationError(f"{path}: bad measure row: {exc}") from exc
        return _measure_from_rows(nodes, masses, str(path))
    data = _read_json(path)
    if isinstance(data, dict) and "measures" in data:
        data = data["measures"][0]
    if isinstance(data, dict):
        return _measure_from_rows(data["support"], data["mass"], str(path))
    try:
        return _measure_from_rows([r[0] for r in data], [r[1] for r in data], str(path))
    except (TypeError, IndexError) as exc:
        raise ValidationError(f"{path}: malformed measure") from exc


def _matrix_format(path, fmt):
    if fmt is None:
        fmt = "json" if Path(path).suffix.lower() == ".json" else "csv"
    if fmt not in ("csv", "json"):
        raise ValidationError(f"matrix format must be csv or json, got {fmt!r}")
    return fmt


def save_matrix(values, path, format: Optional[str] = None) -> None:
    """Write a square symmetric matrix; round-trips exactly via :func:`load_matrix`."""
    mat = np.asarray(values, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValidationError(f"matrix must be square, got shape {mat.shape}")
    if not np.array_equal(mat, mat.T):
        raise ValidationError("matrix is not symmetric")
    if _matrix_format(path, format) == "json":
        text = json.dumps({"matrix": mat.tolist()}) + "\n"
    else:
        text = "".join(",".join(_fmt(x) for x in row) + "\n" for row in mat.tolist())
    _write_text(path, text)


def load_matrix(path, format: Optional[str] = None) -> np.ndarray:
    if _matrix_format(path, format) == "json":
        data = _read_json(path)
        rows = data["matrix"] if isinstance(data, dict) else data
    else:
        rows = [[float(x) for x in r] for r in _read_csv(path, header=False)]
    mat = np.array(rows, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValidationError(f"{path}: matrix is not square")
    return mat


def _write_text(path, text: str) -> None:
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def _read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc


def _read_csv(path, header: bool = True) -> list:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    if header and rows:
        try:
            float(rows[0][-1])
        except ValueError:
            rows = rows[1:]
    return rows
