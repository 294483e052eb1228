"""Dataset ingestion, metric persistence, and report serialization.

Text formats only. Numeric fields are written with full round-trip
precision (``repr`` of the float), so write-then-read reproduces every
value bit-exactly. All writers are atomic: content goes to a temporary
file in the target directory which is then renamed over the destination,
so a crash never leaves a half-written file.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset
from .evaluation import EvalReport, RunRecord
from .exceptions import (
    CorruptMatrix,
    EmptyFile,
    InconsistentWidth,
    NotPositiveDefinite,
    ParseError,
    VersionMismatch,
)
from .learn import GmmlConfig, LearnedMetric, MetricProvenance
from .spd import check_spd

METRIC_MAGIC = "gmml-metric"
METRIC_FORMAT_VERSION = 1


@dataclass(frozen=True)
class DatasetFingerprint:
    """Shape counts plus a 64-bit content hash of points and labels."""

    n: int
    d: int
    c: int
    content_hash: str

    def compact(self) -> str:
        return f"n={self.n} d={self.d} c={self.c} hash={self.content_hash}"


def fingerprint_dataset(data: LabeledDataset) -> DatasetFingerprint:
    """Stable fingerprint: changes iff points or labels change."""
    h = hashlib.blake2b(digest_size=8)
    h.update(repr(data.points.shape).encode())
    h.update(np.ascontiguousarray(data.points, dtype=np.float64).tobytes())
    h.update(np.ascontiguousarray(data.labels, dtype=np.int64).tobytes())
    return DatasetFingerprint(
        n=data.n_points,
        d=data.n_features,
        c=data.num_classes,
        content_hash=h.hexdigest(),
    )


def _matrix_hash(m: np.ndarray) -> str:
    h = hashlib.blake2b(digest_size=8)
    h.update(repr(m.shape).encode())
    h.update(np.ascontiguousarray(m, dtype=np.float64).tobytes())
    return h.hexdigest()


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_dataset(
    path,
    label_column: int = -1,
    delimiter: str | None = None,
    name: str | None = None,
) -> LabeledDataset:
    """Read a delimited text dataset: one sample per row, one label column.

    The delimiter is detected from the first data row (comma if present,
    otherwise any whitespace) unless given explicitly. ``label_column``
    selects the label by index, negative indices counting from the end
    (default: last column). Integer labels that already form a dense range
    0..c-1 are kept as-is; any other labels (including strings) are mapped
    to dense codes in first-appearance order, with the original tokens
    recorded in ``label_names``.
    """
    path = Path(path)
    text = path.read_text()

    rows: list[list[str]] = []
    line_numbers: list[int] = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if delimiter is None:
            delimiter = "," if "," in stripped else " "
        if delimiter == ",":
            fields = [f.strip() for f in stripped.split(",")]
        else:
            fields = stripped.split()
        if width is None:
            width = len(fields)
            if width < 2:
                raise ParseError("need at least one feature column and a label column", lineno)
        elif len(fields) != width:
            raise InconsistentWidth(
                f"expected {width} columns, found {len(fields)}", lineno
            )
        rows.append(fields)
        line_numbers.append(lineno)

    if not rows:
        raise EmptyFile(f"{path} contains no data rows")

    col = label_column if label_column >= 0 else width + label_column
    if not 0 <= col < width:
        raise ParseError(f"label column {label_column} out of range for {width} columns")

    label_tokens: list[str] = []
    features = np.empty((len(rows), width - 1))
    for r, (fields, lineno) in enumerate(zip(rows, line_numbers)):
        label_tokens.append(fields[col])
        feat = fields[:col] + fields[col + 1:]
        for c_idx, tok in enumerate(feat):
            try:
                value = float(tok)
            except ValueError:
                raise ParseError(f"non-numeric feature value {tok!r}", lineno) from None
            if not np.isfinite(value):
                raise ParseError(f"non-finite feature value {tok!r}", lineno)
            features[r, c_idx] = value

    labels, label_names = _encode_labels(label_tokens)
    return LabeledDataset(
        points=features,
        labels=labels,
        label_names=label_names,
        name=name if name is not None else path.stem,
    )


def _encode_labels(tokens: list[str]) -> tuple[np.ndarray, list[str]]:
    try:
        ints = [int(t) for t in tokens]
    except ValueError:
        ints = None
    if ints is not None:
        distinct = sorted(set(ints))
        if distinct == list(range(len(distinct))):
            return np.asarray(ints, dtype=np.int64), [str(v) for v in distinct]
    mapping: dict[str, int] = {}
    for t in tokens:
        if t not in mapping:
            mapping[t] = len(mapping)
    codes = np.asarray([mapping[t] for t in tokens], dtype=np.int64)
    return codes, list(mapping)


def save_metric(metric: LearnedMetric, path, fingerprint: DatasetFingerprint | None = None) -> None:
    """Write a learned metric as a versioned text document.

    Stores the full matrix row-major at round-trip precision together with
    the solver configuration echo, the self-check residual, pair counts,
    a creation timestamp, and the dataset fingerprint when available.
    """
    m = metric.matrix
    prov = metric.provenance
    prior = metric.config.prior
    lines = [
        f"{METRIC_MAGIC} {METRIC_FORMAT_VERSION}",
        f"dim: {metric.dim}",
        f"t: {metric.config.t!r}",
        f"lambda: {metric.config.lam!r}",
        f"prior_hash: {'identity' if prior is None else _matrix_hash(prior)}",
        f"riccati_residual: {prov.riccati_residual!r}",
        f"sim_count: {prov.sim_count}",
        f"dis_count: {prov.dis_count}",
        f"created: {datetime.now(timezone.utc).isoformat()}",
        f"fingerprint: {prov.fingerprint if prov.fingerprint else 'none'}",
        "matrix:",
    ]
    for row in m:
        lines.append(" ".join(repr(float(v)) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def load_metric(path) -> LearnedMetric:
    """Read a metric file written by :func:`save_metric`.

    Refuses unknown format versions; validates the stored matrix is SPD
    (CorruptMatrix otherwise). The prior is not reconstructed, only its
    hash is stored, so the returned config carries ``prior=None``.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise CorruptMatrix(f"{path} is empty")
    head = lines[0].split()
    if len(head) != 2 or head[0] != METRIC_MAGIC:
        raise ParseError(f"not a metric file: {path}", 1)
    if head[1] != str(METRIC_FORMAT_VERSION):
        raise VersionMismatch(
            f"metric format version {head[1]} is not supported "
            f"(this build reads version {METRIC_FORMAT_VERSION})"
        )

    fields: dict[str, str] = {}
    matrix_start = None
    for i, line in enumerate(lines[1:], start=2):
        if line.strip() == "matrix:":
            matrix_start = i
            break
        key, _, value = line.partition(":")
        fields[key.strip()] = value.strip()
    if matrix_start is None:
        raise CorruptMatrix(f"{path} has no matrix section")

    try:
        dim = int(fields["dim"])
        t = float(fields["t"])
        lam = float(fields["lambda"])
        residual = float(fields["riccati_residual"])
        sim_count = int(fields.get("sim_count", 0))
        dis_count = int(fields.get("dis_count", 0))
    except (KeyError, ValueError) as exc:
        raise CorruptMatrix(f"{path} has a malformed header: {exc}") from exc
    fp = fields.get("fingerprint", "none")

    entries = []
    for offset, line in enumerate(lines[matrix_start:]):
        if not line.strip():
            continue
        try:
            entries.append([float(tok) for tok in line.split()])
        except ValueError as exc:
            raise ParseError(f"bad matrix entry: {exc}", matrix_start + offset + 1) from None
    if len(entries) != dim or any(len(row) != dim for row in entries):
        raise CorruptMatrix(
            f"{path} declares dim {dim} but its matrix section is "
            f"{len(entries)} row(s) of lengths {sorted({len(r) for r in entries})}"
        )
    matrix = np.asarray(entries)
    try:
        check_spd(matrix, "stored metric")
    except NotPositiveDefinite as exc:
        raise CorruptMatrix(f"{path}: stored matrix fails the SPD check: {exc}") from exc

    return LearnedMetric(
        matrix=matrix,
        config=GmmlConfig(t=t, lam=lam, prior=None),
        provenance=MetricProvenance(
            sim_count=sim_count,
            dis_count=dis_count,
            riccati_residual=residual,
            fingerprint=None if fp == "none" else fp,
        ),
    )


def report_to_dict(report: EvalReport) -> dict:
    out = dataclasses.asdict(report)
    out["records"] = [dataclasses.asdict(r) for r in report.records]
    if report.label_names is not None:
        out["label_names"] = list(report.label_names)
    return out


def report_from_dict(doc: dict) -> EvalReport:
    records = tuple(RunRecord(**r) for r in doc["records"])
    fields = {k: v for k, v in doc.items() if k != "records" and k != "label_names"}
    label_names = doc.get("label_names")
    return EvalReport(
        records=records,
        label_names=tuple(label_names) if label_names else None,
        **fields,
    )


def _t_distribution(report: EvalReport) -> str:
    ts = report.chosen_ts
    if not ts:
        return "-"
    counts: dict[float, int] = {}
    for t in ts:
        counts[t] = counts.get(t, 0) + 1
    return " ".join(f"{t:.2f}x{c}" for t, c in sorted(counts.items()))


def format_report_table(reports) -> str:
    """Human-readable table, one row per report."""
    if isinstance(reports, EvalReport):
        reports = [reports]
    header = f"{'dataset':<20} {'error':<19} {'learn s':<10} {'total s':<10} {'chosen t':<24} failures"
    rows = [header, "-" * len(header)]
    for rep in reports:
        err = f"{rep.mean_error:.4f} +/- {rep.std_error:.4f}"
        rows.append(
            f"{rep.dataset_name or '(unnamed)':<20} {err:<19} "
            f"{rep.mean_learn_time:<10.4f} {rep.mean_total_time:<10.4f} "
            f"{_t_distribution(rep):<24} {rep.n_failures}/{len(rep.records)}"
        )
    return "\n".join(rows)


def write_report(reports, path, fmt: str = "table") -> None:
    """Write one report or a sequence of reports.

    ``fmt="table"`` renders the human table; ``fmt="json"`` writes a
    machine-readable document containing every report field, which
    :func:`read_report` parses back to equal dataclasses.
    """
    single = isinstance(reports, EvalReport)
    if fmt == "table":
        _atomic_write(path, format_report_table(reports) + "\n")
    elif fmt == "json":
        doc = report_to_dict(reports) if single else [report_to_dict(r) for r in reports]
        _atomic_write(path, json.dumps(doc, indent=2) + "\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def read_report(path):
    """Parse a JSON report file back into EvalReport value(s)."""
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, list):
        return [report_from_dict(d) for d in doc]
    return report_from_dict(doc)
