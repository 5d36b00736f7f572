"""CSV ingestion and report serialization.

Input is wide: one row per subject, one column per indicator, a group
column and optional stratum columns. Empty fields and ``NA`` mark missing
values. Reports are JSON (canonical), a flat CSV table, or plain text.
Floats are written in shortest round-trip form, so values survive a
write/read cycle bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import IoError, MissingColumn, NonNumericIndicator, ParseError
from .model import IndicatorDataset

MISSING_TOKENS = frozenset({"", "NA"})
STRATUM_SEP = "|"


def read_csv(
    path,
    indicators: Sequence[str] | None = None,
    group: str = "z",
    strata: Sequence[str] | None = None,
) -> IndicatorDataset:
    """Load a wide CSV; ``indicators=None`` takes every column except group/strata."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise ParseError("file is empty; a header row is required")
    header = [h.strip() for h in rows[0]]
    strata = list(strata or [])
    if indicators is None:
        indicators = [h for h in header if h != group and h not in strata]
    indicators = list(indicators)
    col = {}
    for name in [*indicators, group, *strata]:
        if name not in header:
            raise MissingColumn(f"column {name!r} not found in header", column=name)
        col[name] = header.index(name)

    data = rows[1:]
    values = np.empty((len(data), len(indicators)))
    labels, stratum_labels = [], []
    for r, row in enumerate(data, start=1):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", row=r)
        for j, name in enumerate(indicators):
            cell = row[col[name]].strip()
            if cell in MISSING_TOKENS:
                values[r - 1, j] = np.nan
                continue
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericIndicator(f"non-numeric value {cell!r}", row=r, column=name) from None
            if not math.isfinite(v):
                raise NonNumericIndicator(f"non-finite value {cell!r}", row=r, column=name)
            values[r - 1, j] = v
        g = row[col[group]].strip()
        if g in MISSING_TOKENS:
            raise ParseError("missing group label", row=r, column=group)
        labels.append(g)
        if strata:
            parts = [row[col[s]].strip() for s in strata]
            if any(s in MISSING_TOKENS for s in parts):
                raise ParseError("missing stratum label", row=r)
            stratum_labels.append(STRATUM_SEP.join(parts))
    if not data:
        raise ParseError("no data rows")
    return IndicatorDataset.from_labels(
        values,
        labels,
        stratum_labels if strata else None,
        indicator_names=indicators,
    )


def _fmt(v: float) -> str:
    return "NA" if math.isnan(v) else repr(float(v))


def dataset_to_csv(dataset: IndicatorDataset, group_column: str = "z") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*dataset.indicator_names, group_column])
    for row, g in zip(dataset.values, dataset.group):
        w.writerow([*(_fmt(v) for v in row), dataset.group_names[g]])
    return buf.getvalue()


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    if str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_dataset_csv(dataset: IndicatorDataset, path, group_column: str = "z") -> None:
    atomic_write(path, dataset_to_csv(dataset, group_column))


@dataclass
class ReportDocument:
    invocation: str
    dataset_summary: dict | None
    result_kind: str
    result: dict | list
    diagnostics: dict | None = None
    tool_version: str = field(default=__version__)

    def to_dict(self) -> dict:
        d = {
            "tool_version": self.tool_version,
            "invocation": self.invocation,
            "result_kind": self.result_kind,
            "result": self.result,
        }
        if self.dataset_summary:
            d["dataset_summary"] = self.dataset_summary
        if self.diagnostics:
            d["diagnostics"] = self.diagnostics
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ReportDocument:
        return cls(
            invocation=d["invocation"],
            dataset_summary=d.get("dataset_summary"),
            result_kind=d["result_kind"],
            result=d["result"],
            diagnostics=d.get("diagnostics"),
            tool_version=d["tool_version"],
        )


TABLE_KEYS = {
    "test": ["statistic", "df", "p_value", "sigma2_restricted", "sigma2_full", "m_obs",
             "converged", "iterations"],
    "calibration": ["replicates", "rejections", "rate", "ci_low", "ci_high", "alpha_level",
                    "seed"],
}


def _table_rows(doc: ReportDocument) -> tuple[list[str], list[list]]:
    kind, res = doc.result_kind, doc.result
    if kind == "test":
        keys = TABLE_KEYS["test"]
        return keys, [[res[k] for k in keys]]
    if kind == "stratified":
        keys = ["stratum", *TABLE_KEYS["test"], "bonferroni_p"]
        rows = [[s.get(k) for k in keys] for s in res["strata"]]
        rows.append(["combined", res["combined_statistic"], res["combined_df"],
                     res["combined_p"]] + [None] * (len(keys) - 4))
        return keys, rows
    if kind == "calibration":
        keys = TABLE_KEYS["calibration"]
        rows = res if isinstance(res, list) else [res]
        return ["row", *keys], [[i, *(r[k] for k in keys)] for i, r in enumerate(rows)]
    raise ValueError(f"no table layout for result kind {kind!r}")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _render_csv(doc: ReportDocument) -> str:
    keys, rows = _table_rows(doc)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _render_matrix(title, rows, row_names, col_names) -> list[str]:
    width = max([len(str(c)) for c in col_names] + [12])
    head = " " * 10 + "".join(f"{str(c):>{width + 2}}" for c in col_names)
    out = [title, head]
    for name, row in zip(row_names, rows):
        out.append(f"{str(name):<10}" + "".join(f"{v:>{width + 2}.6g}" for v in row))
    return out


def _render_text(doc: ReportDocument) -> str:
    lines = [f"structest {doc.tool_version}", f"invocation: {doc.invocation}"]
    ds = doc.dataset_summary
    if ds:
        lines.append(f"data: N={ds['N']} subjects, n={ds['n']} indicators, "
                     f"p={ds['p']} groups, M={ds['M']} observed values")
    res, kind = doc.result, doc.result_kind
    if kind == "test":
        lines += [
            f"LRT statistic  {res['statistic']:.6g}",
            f"df             {res['df']}",
            f"p-value        {res['p_value']:.4g}",
            f"sigma2 (rank-1 / saturated)  {res['sigma2_restricted']:.6g} / "
            f"{res['sigma2_full']:.6g}",
            f"converged={res['converged']} after {res['iterations']} iterations",
        ]
        lines += [f"warning: {w}" for w in res.get("warnings", [])]
    elif kind == "stratified":
        for s in res["strata"]:
            lines.append(f"stratum {s['stratum']}: X2={s['statistic']:.6g} df={s['df']} "
                         f"p={s['p_value']:.4g} (Bonferroni {s['bonferroni_p']:.4g})")
        lines.append(f"combined: X2={res['combined_statistic']:.6g} "
                     f"df={res['combined_df']} p={res['combined_p']:.4g}")
    elif kind == "calibration":
        for r in res if isinstance(res, list) else [res]:
            lines.append(f"rate {r['rate']:.4f} [{r['ci_low']:.4f}, {r['ci_high']:.4f}] "
                         f"({r['rejections']}/{r['replicates']} at alpha={r['alpha_level']})")
    elif kind == "diagnose":
        pass
    else:
        lines.append(json.dumps(res, indent=2))
    diag = doc.diagnostics
    if diag:
        label = "implied loadings (alpha)" if diag.get("implied") else "loadings"
        lines.append("")
        lines.append(f"{label}: " + ", ".join(f"{v:.4g}" for v in diag["lambda"]))
        lines += _render_matrix("cell means", diag["cell_means"],
                                diag["indicator_names"], diag["group_names"])
        lines += _render_matrix("scaled contrasts (equal down each column under the null)",
                                diag["scaled_contrasts"], diag["indicator_names"],
                                diag["group_names"])
        lines.append(f"max |lambda_i m_jz - lambda_j m_iz| = "
                     f"{diag['max_abs_proportionality_residual']:.4g}")
        if "implied_ratios" in diag:
            lines.append("implied loading ratios (to first indicator): "
                         + ", ".join(f"{v:.4g}" for v in diag["implied_ratios"]))
        if "oracle" in diag:
            lines.append(f"oracle check: {json.dumps(diag['oracle'])}")
    return "\n".join(lines) + "\n"


def render_report(doc: ReportDocument, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(doc.to_dict(), indent=2) + "\n"
    if fmt == "csv-table":
        return _render_csv(doc)
    if fmt == "text":
        return _render_text(doc)
    raise ValueError(f"unknown report format {fmt!r}")


def write_report(doc: ReportDocument, path, fmt: str = "json") -> None:
    atomic_write(path, render_report(doc, fmt))


def read_report(path) -> ReportDocument:
    try:
        with open(path) as fh:
            return ReportDocument.from_dict(json.load(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
