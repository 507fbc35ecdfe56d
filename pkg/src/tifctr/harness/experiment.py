"""Run every (model, loss, seed) cell of an experiment and keep a resumable manifest."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .. import data as D
from ..errors import DataError
from ..models import save_checkpoint
from ..trainer import TrainConfig, evaluate, train
from . import tables

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RECORD_SCHEMA_VERSION = 1


def load_dataset(section):
    """Materialise the dataset described by a ``DatasetSection``."""
    if section.source == "synthetic":
        return D.generate_drift(section.synthetic.drift_config()).dataset
    if section.source == "prepared":
        return D.DayIndexedDataset.load(section.path)
    schema = D.CsvSchema(time_features=section.time_features)
    records = D.load_csv(section.path, schema, on_error=section.on_error)
    return D.chronological_split(records, tuple(section.ratios), section.min_frequency,
                                 section.day_aligned, section.time_features)


def cell_key(model_name, loss_name, seed):
    return f"{model_name}__{loss_name}__seed{seed}"


def plan(config):
    """Ordered list of cells: dicts with key, hash and everything needed to run."""
    ds_hash = config.dataset_hash()
    cells = []
    for mi, m in enumerate(config.models):
        for li, l in enumerate(config.losses):
            for seed in config.seeds:
                ident = {
                    "dataset": ds_hash, "model": m.model_dump(), "loss": l.model_dump(),
                    "train": config.train.model_dump(), "seed": seed,
                }
                digest = hashlib.sha256(json.dumps(ident, sort_keys=True).encode()).hexdigest()[:16]
                cells.append({
                    "key": cell_key(m.name, l.name, seed), "hash": digest,
                    "model": m, "loss": l, "seed": seed, "model_order": mi, "variant_order": li,
                })
    return cells


def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_manifest(out_dir):
    path = Path(out_dir) / MANIFEST
    if not path.is_file():
        return {"version": 1, "cells": {}}
    return json.loads(path.read_text())


def run_cell(dataset, cell, train_section, out_dir):
    """Train and test one cell; write its checkpoint and run record. Returns the record path."""
    out_dir = Path(out_dir)
    m, l, seed = cell["model"], cell["loss"], cell["seed"]
    cfg = TrainConfig(
        batch_size=train_section.batch_size, max_epochs=train_section.max_epochs,
        learning_rate=train_section.learning_rate,
        early_stop_patience=train_section.early_stop_patience, seed=seed,
        loss=l.spec(dataset.n_days, train_section.normalization),
        model=m.spec(dataset.field_count), eval_metric=train_section.eval_metric,
    )
    model, run = train(dataset, cfg)
    test = evaluate(model, dataset.test)
    val = evaluate(model, dataset.val)
    ckpt = Path("checkpoints") / f"{cell['key']}.npz"
    (out_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out_dir / ckpt)
    record = {
        "schema_version": RECORD_SCHEMA_VERSION,
        "cell": cell["key"], "cell_hash": cell["hash"],
        "model": m.name, "model_order": cell["model_order"],
        "variant": l.name, "variant_order": cell["variant_order"],
        "seed": seed, "config": cfg.to_json(),
        "dataset": {"n_days": dataset.n_days, "vocab_size": dataset.vocab.size,
                    "train": len(dataset.train), "val": len(dataset.val), "test": len(dataset.test)},
        "run": run.to_json(),
        "val": val.to_json(), "test": test.to_json(),
        "checkpoint": str(ckpt),
    }
    rec_path = out_dir / tables.RUNS_DIR / f"{cell['key']}.json"
    rec_path.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(rec_path, json.dumps(record, indent=2, sort_keys=True) + "\n")
    return str(rec_path.relative_to(out_dir))


def _worker(args):
    dataset, cell, train_section, out_dir = args
    try:
        return cell["key"], run_cell(dataset, cell, train_section, out_dir), None
    except Exception as exc:  # recorded in the manifest; other cells keep running
        log.debug("cell %s failed\n%s", cell["key"], traceback.format_exc())
        return cell["key"], None, f"{type(exc).__name__}: {exc}"


def run_experiment(config, out_dir=None, jobs=1, dataset=None):
    """Run all pending cells, then write ``table.txt`` and ``table.csv``.

    Cells whose hash is already marked done in the manifest (and whose record
    file still exists) are skipped.  Returns ``(rows, table_text, failures)``.
    """
    out_dir = Path(out_dir or config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = read_manifest(out_dir)
    cells = plan(config)
    pending = []
    for c in cells:
        done = manifest["cells"].get(c["key"])
        if (done and done.get("status") == "done" and done.get("hash") == c["hash"]
                and (out_dir / done["record"]).is_file()):
            continue
        pending.append(c)
    log.info("%d cells, %d already complete", len(cells), len(cells) - len(pending))

    if pending and dataset is None:
        dataset = load_dataset(config.dataset)
    by_key = {c["key"]: c for c in cells}
    work = [(dataset, c, config.train, str(out_dir)) for c in pending]

    def settle(key, rec, err):
        entry = {"hash": by_key[key]["hash"], "status": "done" if err is None else "failed"}
        if err is None:
            entry["record"] = rec
        else:
            entry["error"] = err
            (out_dir / tables.RUNS_DIR / f"{key}.json").unlink(missing_ok=True)
            log.error("cell %s failed: %s", key, err)
        manifest["cells"][key] = entry
        _atomic_write(out_dir / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        log.info("cell %s %s", key, entry["status"])

    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for result in pool.map(_worker, work):
                settle(*result)
    else:
        for w in work:
            settle(*_worker(w))

    failures = sorted(k for k, v in manifest["cells"].items()
                      if k in by_key and v["status"] != "done")
    try:
        rows, text = tables.write_tables(out_dir)
    except DataError:
        rows, text = [], ""
    return rows, text, failures
