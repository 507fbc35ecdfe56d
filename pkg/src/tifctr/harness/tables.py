"""Comparison tables aggregated from run-record files.

Rendering is a pure function of the records on disk, so ``report`` reproduces
the tables written by ``compare`` byte for byte.
"""
from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass
from pathlib import Path

from ..errors import DataError, MetricUndefinedError
from ..metrics import rela_imp

RUNS_DIR = "runs"
TABLE_CSV = "table.csv"
TABLE_TXT = "table.txt"


@dataclass(frozen=True)
class TableRow:
    model: str
    variant: str
    seeds: tuple
    logloss: float
    logloss_min: float
    logloss_max: float
    auc: float
    auc_min: float
    auc_max: float
    relaimp: float  # percent vs the model's plain row; nan if undefined
    records: tuple


def load_records(out_dir):
    run_dir = Path(out_dir) / RUNS_DIR
    files = sorted(run_dir.glob("*.json")) if run_dir.is_dir() else []
    if not files:
        raise DataError(f"no run records found in {run_dir}")
    records = []
    for f in files:
        rec = json.loads(f.read_text())
        rec["_file"] = f"{RUNS_DIR}/{f.name}"
        records.append(rec)
    return records


def build_table(records):
    groups = {}
    for rec in records:
        groups.setdefault((rec["model_order"], rec["model"], rec["variant_order"], rec["variant"]),
                          []).append(rec)
    baseline = {}
    for (_, model, _, variant), recs in groups.items():
        if variant == "plain":
            baseline[model] = statistics.median(r["test"]["auc"] for r in recs)
    rows = []
    for key in sorted(groups):
        _, model, _, variant = key
        recs = sorted(groups[key], key=lambda r: r["seed"])
        ll = [r["test"]["logloss"] for r in recs]
        au = [r["test"]["auc"] for r in recs]
        med_auc = statistics.median(au)
        try:
            imp = rela_imp(baseline[model], med_auc) if model in baseline else float("nan")
        except MetricUndefinedError:
            imp = float("nan")
        rows.append(TableRow(
            model=model, variant=variant, seeds=tuple(r["seed"] for r in recs),
            logloss=statistics.median(ll), logloss_min=min(ll), logloss_max=max(ll),
            auc=med_auc, auc_min=min(au), auc_max=max(au), relaimp=imp,
            records=tuple(r["_file"] for r in recs),
        ))
    return rows


def _pct(x):
    return "n/a" if x != x else f"{x:.2f}%"


def render_text(rows):
    header = ("model", "variant", "seeds", "logloss", "logloss range", "AUC", "AUC range", "RelaImp")
    body = [(r.model, r.variant, str(len(r.seeds)), f"{r.logloss:.4f}",
             f"{r.logloss_min:.4f}-{r.logloss_max:.4f}", f"{r.auc:.4f}",
             f"{r.auc_min:.4f}-{r.auc_max:.4f}", _pct(r.relaimp)) for r in rows]
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [line(header), "  ".join("-" * w for w in widths)]
    prev = None
    for r, cells in zip(rows, body):
        if prev is not None and r.model != prev:
            out.append("")
        out.append(line(cells))
        prev = r.model
    out.append("")
    out.append("medians over seeds; RelaImp of the median AUC vs the model's plain BCE row")
    return "\n".join(out) + "\n"


def render_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "variant", "seeds", "logloss_median", "logloss_min", "logloss_max",
                "auc_median", "auc_min", "auc_max", "relaimp_pct", "run_records"])
    for r in rows:
        w.writerow([r.model, r.variant, " ".join(map(str, r.seeds)),
                    repr(r.logloss), repr(r.logloss_min), repr(r.logloss_max),
                    repr(r.auc), repr(r.auc_min), repr(r.auc_max),
                    "" if r.relaimp != r.relaimp else repr(r.relaimp), ";".join(r.records)])
    return buf.getvalue()


def write_tables(out_dir):
    rows = build_table(load_records(out_dir))
    out_dir = Path(out_dir)
    (out_dir / TABLE_CSV).write_text(render_csv(rows))
    text = render_text(rows)
    (out_dir / TABLE_TXT).write_text(text)
    return rows, text
