"""Reading model and count files, writing result tables.

Counts files are UTF-8 CSV with header ``cell,count``. Labels are resolved
against the compiled model (non-canonical spellings such as reversed
diplotypes are accepted); unlisted cells count as zero.
"""

from __future__ import annotations

import csv
import json
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from scipy.stats import chi2

from .datasets import bundled_path
from .errors import AllZeroData, NegativeCount, ParseError, UnknownCell, UnknownCellLabel
from .models import CompiledModel, compile_model, model_from_dict


def resolve_path(name) -> Path:
    """``name`` itself if it exists, else the bundled file of that name."""
    p = Path(name)
    if p.exists():
        return p
    ref = bundled_path(p.name)
    if ref is None:
        raise FileNotFoundError(f"no such file: {name}")
    return Path(str(ref))


def load_model(path) -> CompiledModel:
    path = resolve_path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path.name}: {exc.msg} (column {exc.colno})", exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path.name}: model file must hold a JSON object", 1)
    try:
        return compile_model(model_from_dict(doc))
    except KeyError as exc:
        raise ParseError(f"{path.name}: missing field {exc}", None) from None


def parse_counts(model: CompiledModel, lines) -> np.ndarray:
    """Frequency vector from CSV lines (header ``cell,count``)."""
    x = np.zeros(model.configuration.nu, dtype=np.int64)
    seen: dict = {}
    unknown = []
    reader = csv.reader(lines)
    header = None
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if header is None:
            header = [c.strip().lower() for c in row]
            if header != ["cell", "count"]:
                raise ParseError(f"expected header 'cell,count', got {','.join(row)!r}", line)
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", line)
        label, raw = row[0].strip(), row[1].strip()
        try:
            count = int(raw)
        except ValueError:
            raise ParseError(f"count {raw!r} is not an integer", line) from None
        if count < 0:
            raise NegativeCount(f"line {line}: negative count {count} for {label!r}")
        try:
            i = model.resolve(label)
        except UnknownCell:
            unknown.append(label)
            continue
        if i in seen:
            raise ParseError(f"cell {label!r} already given on line {seen[i]}", line)
        seen[i] = line
        x[i] = count
    if unknown:
        raise UnknownCellLabel(unknown)
    if x.sum() == 0:
        raise AllZeroData("counts file has no positive counts")
    return x


def load_counts(model: CompiledModel, path) -> np.ndarray:
    path = resolve_path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_counts(model, fh)


def load_inputs(model_path, data_path) -> tuple:
    """(compiled model, frequency vector)."""
    model = load_model(model_path)
    return model, load_counts(model, data_path)


@contextmanager
def _csv_writer(target):
    """CSV writer on a path, or on an already open text stream (left open)."""
    if hasattr(target, "write"):
        yield csv.writer(target, lineterminator="\n")
        return
    with open(target, "w", newline="", encoding="utf-8") as fh:
        yield csv.writer(fh, lineterminator="\n")


def write_counts(path, model: CompiledModel, x) -> None:
    with _csv_writer(path) as w:
        w.writerow(["cell", "count"])
        for lab, v in zip(model.labels, x):
            w.writerow([lab, int(v)])


def write_fitted(path, model: CompiledModel, x, m_hat) -> None:
    with _csv_writer(path) as w:
        w.writerow(["cell", "observed", "fitted"])
        for lab, o, m in zip(model.labels, x, m_hat):
            w.writerow([lab, int(o), repr(float(m))])


def write_samples(path, statistics, metadata: dict | None = None) -> None:
    """``index,statistic`` CSV plus a ``.json`` sidecar with chain metadata."""
    with _csv_writer(path) as w:
        w.writerow(["index", "statistic"])
        for k, s in enumerate(statistics):
            w.writerow([k, repr(float(s))])
    if metadata is not None:
        Path(path).with_suffix(".json").write_text(json.dumps(metadata, indent=2) + "\n", encoding="utf-8")


def histogram_bins(values, bins="fd"):
    """(counts, edges); Freedman-Diaconis bin width unless ``bins`` says otherwise."""
    values = np.asarray(values, dtype=float)
    edges = np.histogram_bin_edges(values, bins=bins)
    counts, edges = np.histogram(values, bins=edges)
    return counts, edges


def write_histogram(path, values, bins="fd", density_df: int | None = None) -> None:
    """Histogram CSV ``left,right,count,density`` with an optional chi-square overlay column."""
    counts, edges = histogram_bins(values, bins)
    total = counts.sum()
    widths = np.diff(edges)
    dens = counts / (total * widths) if total else np.zeros_like(widths)
    overlay = None
    if density_df is not None:
        overlay = chi2.pdf(0.5 * (edges[:-1] + edges[1:]), density_df)
    with _csv_writer(path) as w:
        head = ["left", "right", "count", "density"] + (["chi2_pdf"] if overlay is not None else [])
        w.writerow(head)
        for k in range(len(counts)):
            row = [repr(float(edges[k])), repr(float(edges[k + 1])), int(counts[k]), repr(float(dens[k]))]
            if overlay is not None:
                row.append(repr(float(overlay[k])))
            w.writerow(row)
