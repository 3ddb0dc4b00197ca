"""File formats: annotations, paired datasets, label files, sample tensors, reports."""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

TENSOR_MAGIC = b"SEVT0001"
_HEADER = struct.Struct("<8sQQQ")
_PROB_TOL = 1e-6
SPLITS = ("train", "test")


class IngestionError(ValueError):
    """Malformed input file; ``line`` is 1-based and counts the header."""

    def __init__(self, path, line, message):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


def fmt_float(x):
    return repr(float(x)) if math.isfinite(x) else str(x)


# ---------------------------------------------------------------- annotations


@dataclass
class AnnotationSet:
    records: list
    k: int
    dropped: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        seen = set()
        for sid, aid, c in self.records:
            if (sid, aid) in seen:
                raise ValueError(f"duplicate annotation for sample {sid!r} by annotator {aid!r}")
            seen.add((sid, aid))
            if not 0 <= c < self.k:
                raise ValueError(f"class index {c} outside [0, {self.k})")


def load_annotations(path, k):
    """Read ``sample_id,annotator_id,class_index`` rows.

    Rows with a missing class are dropped (invalid responses); anything
    else malformed raises :class:`IngestionError` with the line number.
    """
    path = Path(path)
    records, dropped, seen = [], 0, {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestionError(path, None, "file is empty")
        if [h.strip() for h in header] != ["sample_id", "annotator_id", "class_index"]:
            raise IngestionError(path, 1, "header must be sample_id,annotator_id,class_index")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise IngestionError(path, line, f"expected 3 fields, got {len(row)}")
            sid, aid, raw = (c.strip() for c in row)
            if not sid or not aid:
                raise IngestionError(path, line, "empty sample_id or annotator_id")
            if raw == "":
                dropped += 1
                continue
            try:
                c = int(raw)
            except ValueError:
                raise IngestionError(path, line, f"class_index {raw!r} is not an integer") from None
            if not 0 <= c < k:
                raise IngestionError(path, line, f"class_index {c} outside [0, {k})")
            if (sid, aid) in seen:
                raise IngestionError(
                    path, line,
                    f"duplicate annotation for sample {sid!r} by annotator {aid!r} "
                    f"(first on line {seen[(sid, aid)]})",
                )
            seen[(sid, aid)] = line
            records.append((sid, aid, c))
    if not records:
        raise IngestionError(path, None, "no annotations found")
    return AnnotationSet(records, k, dropped)


def aggregate_human_frequency(annotations):
    """Class frequencies per sample, in first-appearance order of sample ids.

    Counts are divided exactly before the float conversion so every vector
    sums to one up to rounding of its components.
    """
    counts = {}
    for sid, _, c in annotations.records:
        counts.setdefault(sid, [0] * annotations.k)[c] += 1
    out = []
    for sid, cnt in counts.items():
        total = sum(cnt)
        out.append((sid, np.array([float(Fraction(c, total)) for c in cnt])))
    return out


# ---------------------------------------------------------------- pairs / labels


@dataclass
class PairedDataset:
    sample_ids: list
    splits: np.ndarray
    labels: np.ndarray
    predictions: np.ndarray = field(default=None)

    def __post_init__(self):
        self.sample_ids = list(self.sample_ids)
        self.splits = np.asarray(self.splits, dtype=object)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.predictions is not None:
            self.predictions = np.asarray(self.predictions, dtype=np.float64)
            if self.predictions.shape != self.labels.shape:
                raise ValueError("labels and predictions must share shape (N, K)")
        n = self.labels.shape[0]
        if len(self.sample_ids) != n or self.splits.shape[0] != n:
            raise ValueError("ids, splits and vectors must have the same length")
        if len(set(self.sample_ids)) != n:
            raise ValueError("sample ids must be unique")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def k(self):
        return self.labels.shape[1]

    def subset(self, idx):
        idx = np.asarray(idx)
        preds = None if self.predictions is None else self.predictions[idx]
        return PairedDataset([self.sample_ids[i] for i in idx], self.splits[idx], self.labels[idx], preds)

    def split(self, tag):
        return self.subset(np.flatnonzero(self.splits == tag))


def _columns(prefix, k):
    return [f"{prefix}_{j}" for j in range(k)]


def _parse_prob(path, line, cells, name):
    try:
        v = np.array([float(c) for c in cells])
    except ValueError:
        raise IngestionError(path, line, f"{name} has a non-numeric entry") from None
    if not np.all(np.isfinite(v)):
        raise IngestionError(path, line, f"{name} contains NaN or infinity")
    if np.any(v < -_PROB_TOL):
        raise IngestionError(path, line, f"{name} has a negative probability {v.min():g}")
    if abs(v.sum() - 1.0) > _PROB_TOL:
        raise IngestionError(path, line, f"{name} sums to {v.sum():.17g}, not 1")
    return v


def _read_header(path, reader):
    header = next(reader, None)
    if header is None:
        raise IngestionError(path, None, "file is empty")
    return [h.strip() for h in header]


def load_pairs(path):
    """Read ``sample_id,split,y_0..y_{K-1},yhat_0..yhat_{K-1}``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = _read_header(path, reader)
        k = (len(header) - 2) // 2
        if k < 2 or header != ["sample_id", "split"] + _columns("y", k) + _columns("yhat", k):
            raise IngestionError(path, 1, "header must be sample_id,split,y_0..y_{K-1},yhat_0..yhat_{K-1}")
        ids, splits, ys, yhats, seen = [], [], [], [], {}
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise IngestionError(path, line, f"expected {len(header)} fields, got {len(row)}")
            sid, tag = row[0].strip(), row[1].strip()
            if sid in seen:
                raise IngestionError(path, line, f"duplicate sample_id {sid!r} (first on line {seen[sid]})")
            if tag not in SPLITS:
                raise IngestionError(path, line, f"split must be train or test, got {tag!r}")
            seen[sid] = line
            ids.append(sid)
            splits.append(tag)
            ys.append(_parse_prob(path, line, row[2 : 2 + k], "y"))
            yhats.append(_parse_prob(path, line, row[2 + k :], "yhat"))
    if not ids:
        raise IngestionError(path, None, "no data rows")
    return PairedDataset(ids, splits, np.array(ys), np.array(yhats))


def save_pairs(path, data):
    k = data.k
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "split"] + _columns("y", k) + _columns("yhat", k))
        for i, sid in enumerate(data.sample_ids):
            w.writerow(
                [sid, data.splits[i]]
                + [fmt_float(x) for x in data.labels[i]]
                + [fmt_float(x) for x in data.predictions[i]]
            )


def save_labels(path, sample_ids, labels):
    """``sample_id,y_0..y_{K-1}`` label file."""
    labels = np.asarray(labels, dtype=np.float64)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id"] + _columns("y", labels.shape[1]))
        for sid, y in zip(sample_ids, labels):
            w.writerow([sid] + [fmt_float(x) for x in y])


def load_labels(path):
    """Read a label file, or the labels of a pairs file.

    Returns ``(sample_ids, labels)``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        header = _read_header(path, csv.reader(fh))
    if len(header) > 1 and header[1] == "split":
        data = load_pairs(path)
        return data.sample_ids, data.labels
    k = len(header) - 1
    if k < 2 or header != ["sample_id"] + _columns("y", k):
        raise IngestionError(path, 1, "header must be sample_id,y_0..y_{K-1}")
    ids, ys, seen = [], [], {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != k + 1:
                raise IngestionError(path, line, f"expected {k + 1} fields, got {len(row)}")
            sid = row[0].strip()
            if sid in seen:
                raise IngestionError(path, line, f"duplicate sample_id {sid!r}")
            seen[sid] = line
            ids.append(sid)
            ys.append(_parse_prob(path, line, row[1:], "y"))
    if not ids:
        raise IngestionError(path, None, "no data rows")
    return ids, np.array(ys)


def split_half_shuffled(data, seed):
    """Shuffle rows with a seeded Fisher-Yates pass; first ceil(n/2) rows fit."""
    n = len(data)
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    order = np.random.default_rng(seed).permutation(n)
    cut = (n + 1) // 2
    return data.subset(order[:cut]), data.subset(order[cut:])


# ---------------------------------------------------------------- tensors


def save_tensor(path, samples):
    arr = np.ascontiguousarray(samples, dtype="<f8")
    if arr.ndim != 3:
        raise ValueError(f"tensor must have shape (N, B, K), got {arr.shape}")
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(TENSOR_MAGIC, *arr.shape))
        fh.write(arr.tobytes())


def load_tensor(path):
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise IngestionError(path, None, "truncated tensor header")
        magic, n, b, k = _HEADER.unpack(head)
        if magic != TENSOR_MAGIC:
            raise IngestionError(path, None, f"bad magic {magic!r}")
        body = fh.read()
    if len(body) != 8 * n * b * k:
        raise IngestionError(path, None, f"expected {8 * n * b * k} data bytes, found {len(body)}")
    arr = np.frombuffer(body, dtype="<f8").reshape(n, b, k).astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise IngestionError(path, None, "tensor contains NaN or infinity")
    return arr


# ---------------------------------------------------------------- reports

_NUM = {"type": ["number", "null"]}

MEASURE_RECORD_SCHEMA = {
    "type": "object",
    "required": ["measure_name", "count", "mean", "median", "hpdi", "rtci", "histogram"],
    "properties": {
        "measure_name": {"type": "string"},
        "count": {"type": "integer", "minimum": 0},
        "mean": _NUM,
        "median": _NUM,
        "hpdi": {
            "type": "object",
            "required": ["lower", "upper", "mass"],
            "properties": {"lower": _NUM, "upper": _NUM, "mass": {"type": "number"}},
        },
        "rtci": {
            "type": "object",
            "required": ["upper", "mass"],
            "properties": {"upper": _NUM, "mass": {"type": "number"}},
        },
        "histogram": {
            "type": "object",
            "required": ["edges", "counts"],
            "properties": {
                "edges": {"type": "array", "items": {"type": "number"}},
                "counts": {"type": "array", "items": {"type": "integer", "minimum": 0}},
            },
        },
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["splits"],
    "properties": {
        "splits": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": MEASURE_RECORD_SCHEMA},
        },
    },
}


def _jsonable(obj):
    """Non-finite floats become null so the output is strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def validate_report(report, schema=REPORT_SCHEMA):
    jsonschema.validate(_jsonable(report), schema)


def dumps_report(report):
    return json.dumps(_jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def save_report(path, report, schema=REPORT_SCHEMA):
    validate_report(report, schema)
    Path(path).write_text(dumps_report(report), encoding="utf-8")


def load_report(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
