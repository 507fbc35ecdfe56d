from .config import ExperimentConfig, load_config, parse_config
from .experiment import load_dataset, run_experiment
from .tables import build_table, load_records, render_csv, render_text, write_tables

__all__ = [
    "ExperimentConfig", "load_config", "parse_config", "load_dataset", "run_experiment",
    "build_table", "load_records", "render_csv", "render_text", "write_tables",
]
