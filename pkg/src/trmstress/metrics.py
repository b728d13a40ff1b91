"""Mean error and relative mean error (RME) between predicted and reference fields."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np

from ._validation import check_finite_array
from .exceptions import RejectedInputError


@dataclass
class ErrorReport:
    sample_id: str
    mean_error: float
    rme: float
    resolution: str = ""
    config_hash: str = ""
    label: str = ""


def _pair(pred, ref):
    p = check_finite_array(pred, "pred")
    r = check_finite_array(ref, "ref")
    if p.shape != r.shape:
        raise RejectedInputError(f"shape mismatch: {p.shape} vs {r.shape}")
    return p, r


def mean_error(pred, ref) -> float:
    """Mean of signed differences ``pred - ref``."""
    p, r = _pair(pred, ref)
    return float(np.mean(p - r))


def rme(pred, ref) -> float:
    """mean(| |pred| - |ref| |) / mean(|ref|).

    Compares magnitudes only, so ``pred = -ref`` scores 0; report it
    together with :func:`mean_error`.
    """
    p, r = _pair(pred, ref)
    denom = np.mean(np.abs(r))
    if denom == 0:
        raise RejectedInputError("reference field is identically zero; RME is undefined")
    return float(np.mean(np.abs(np.abs(p) - np.abs(r))) / denom)


def error_report(pred, ref, sample_id="", resolution=None, config_hash="", label="") -> ErrorReport:
    p, _ = _pair(pred, ref)
    if resolution is None:
        resolution = "x".join(str(n) for n in p.shape)
    return ErrorReport(str(sample_id), mean_error(pred, ref), rme(pred, ref), resolution,
                       config_hash, label)


def aggregate(reports) -> ErrorReport:
    """Average of per-sample reports (mean of mean errors, mean of RMEs)."""
    reports = list(reports)
    if not reports:
        raise RejectedInputError("no reports to aggregate")
    return ErrorReport("aggregate", float(np.mean([r.mean_error for r in reports])),
                       float(np.mean([r.rme for r in reports])), reports[0].resolution,
                       reports[0].config_hash, reports[0].label)


def format_table(rows, columns, delimiter="\t") -> str:
    """Delimited text table; ``rows`` are dicts or ErrorReports."""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        d = asdict(row) if isinstance(row, ErrorReport) else row
        writer.writerow([_fmt(d.get(c, "")) for c in columns])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return v


def attention_table(results: dict) -> str:
    """Rows per attention configuration: positions, train hours, RME of s_xx.

    ``results`` maps a positions label (e.g. "1 2 3 4 5 6 7" or "None") to a
    dict with ``train_hours`` and ``rme``.
    """
    rows = [{"attention_positions": k, "train_hours": v["train_hours"], "rme_sxx": v["rme"],
             "mean_error_sxx": v.get("mean_error", float("nan"))} for k, v in results.items()]
    return format_table(rows, ["attention_positions", "train_hours", "rme_sxx", "mean_error_sxx"])


def weight_table(results: dict) -> str:
    """Rows per (weight ratio, resolution) pair.

    ``results`` maps a ratio label such as "5:1" to {resolution label: rme}.
    """
    rows = [{"weight": w, "resolution": res, "rme_sxx": val}
            for w, per_res in results.items() for res, val in per_res.items()]
    return format_table(rows, ["weight", "resolution", "rme_sxx"])
