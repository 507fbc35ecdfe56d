"""Command-line entry point: ``tifctr {prepare,synth,train,compare,report}``.

Exit codes: 0 success, 1 runtime failure (including failed cells), 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from . import data as D
from .errors import ConfigurationError, DataError, TifCtrError
from .harness import config as C
from .harness.experiment import cell_key, load_dataset, plan, run_cell, run_experiment
from .harness.tables import write_tables

log = logging.getLogger("tifctr")

MODEL_PRESETS = {
    "dnn": ("DNN", "mlp_only"),
    "deepfm": ("DeepFM", "fm_plus_mlp"),
    "dcn": ("DCN", "cross_plus_mlp"),
}


class UsageError(TifCtrError):
    pass


def _common(p):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--seed", type=int, help="seed override")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _experiment_config(args):
    return C.load_config(args.config) if args.config else C.parse_config({})


def _with_data(cfg, path):
    if not path:
        return cfg
    source = "prepared" if Path(path).is_dir() else "csv"
    ds = cfg.dataset.model_copy(update={"source": source, "path": path})
    return cfg.model_copy(update={"dataset": ds})


def cmd_synth(args):
    obj = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        obj = yaml.safe_load(path.read_text()) or {}
        # accept either a bare synthetic section or a full experiment config
        if "dataset" in obj or "version" in obj:
            obj = C.parse_config(obj).dataset.synthetic.model_dump()
    for key in ("n_days", "samples_per_day", "drift_rate"):
        if getattr(args, key) is not None:
            obj[key] = getattr(args, key)
    if args.seed is not None:
        obj["seed"] = args.seed
    try:
        section = C.SyntheticSection.model_validate(obj)
    except Exception as exc:
        raise UsageError(f"invalid synthetic config: {exc}") from None
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    synth = D.generate_drift(section.drift_config())
    D.write_csv(synth.records, out / "synthetic.csv")
    (out / "synthetic_truth.json").write_text(json.dumps(synth.truth_json()) + "\n")
    print(f"wrote {len(synth.records)} rows to {out / 'synthetic.csv'}")
    return 0


def cmd_prepare(args):
    cfg = _with_data(_experiment_config(args), args.csv)
    if cfg.dataset.source != "csv":
        raise UsageError("prepare needs a CSV: pass --csv PATH or a config with dataset.source: csv")
    ds = cfg.dataset
    if args.min_frequency is not None:
        ds = ds.model_copy(update={"min_frequency": args.min_frequency})
    if args.day_aligned:
        ds = ds.model_copy(update={"day_aligned": True})
    dataset = load_dataset(ds)
    out = Path(args.out or "prepared")
    dataset.save(out)
    summary = dataset.split_summary()
    (out / "split.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 0


def cmd_train(args):
    cfg = _with_data(_experiment_config(args), args.data)
    if args.model:
        name, interaction = MODEL_PRESETS[args.model]
        model = C.ModelSection(name=name, interaction=interaction)
    else:
        model = cfg.models[0]
    loss = C.LossSection(variant=args.variant, alpha=args.alpha)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    # a single cell has no baseline row, so bypass the experiment-level validator
    cfg = cfg.model_copy(update={"models": [model], "losses": [loss], "seeds": [seed]})
    out = Path(args.out or cfg.output_dir)
    cell = plan(cfg)[0]
    dataset = load_dataset(cfg.dataset)
    rec_path = run_cell(dataset, cell, cfg.train, out)
    rec = json.loads((out / rec_path).read_text())
    print(json.dumps({"cell": cell_key(model.name, loss.name, seed), "record": rec_path,
                      "test": rec["test"], "val": rec["val"]}, indent=2))
    return 0


def cmd_compare(args):
    cfg = _with_data(_experiment_config(args), args.data)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seeds": [args.seed]})
    out = Path(args.out or cfg.output_dir)
    rows, text, failures = run_experiment(cfg, out, jobs=args.jobs)
    sys.stdout.write(text)
    if failures:
        print(f"{len(failures)} cell(s) failed: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


def cmd_report(args):
    out = args.out
    if out is None:
        out = _experiment_config(args).output_dir
    _, text = write_tables(out)
    sys.stdout.write(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="tifctr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="CSV -> chronological split + vocabulary artifacts")
    _common(p)
    p.add_argument("--csv", help="Avazu-format CSV (overrides dataset.path)")
    p.add_argument("--min-frequency", type=int)
    p.add_argument("--day-aligned", action="store_true")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("synth", help="write a synthetic concept-drift CSV")
    _common(p)
    p.add_argument("--n-days", type=int)
    p.add_argument("--samples-per-day", type=int)
    p.add_argument("--drift-rate", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train and evaluate a single cell")
    _common(p)
    p.add_argument("--data", help="CSV file or prepared directory")
    p.add_argument("--model", choices=sorted(MODEL_PRESETS))
    p.add_argument("--variant", default="tif_linear")
    p.add_argument("--alpha", type=float, default=1.0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="run the full model x loss x seed experiment")
    _common(p)
    p.add_argument("--data", help="CSV file or prepared directory")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="re-render tables from stored run records")
    _common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"tifctr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, TifCtrError, OSError) as exc:
        print(f"tifctr {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
