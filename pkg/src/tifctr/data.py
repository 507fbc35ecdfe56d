"""Avazu-style ingestion, day indexing, chronological splits and synthetic drift data."""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError, ParseError

log = logging.getLogger(__name__)

TIME_FIELDS = ("hour", "weekday", "is_weekend")
OOV_INDEX = 0


# -- timestamps ------------------------------------------------------------

def parse_timestamp(ts, line=None):
    """``YYMMDDHH`` -> datetime (years are 2000-based)."""
    if not isinstance(ts, str) or len(ts) != 8 or not ts.isdigit():
        raise ParseError(f"malformed timestamp {ts!r}, expected YYMMDDHH", line)
    try:
        return datetime(2000 + int(ts[:2]), int(ts[2:4]), int(ts[4:6]), int(ts[6:]))
    except ValueError as exc:
        raise ParseError(f"invalid timestamp {ts!r}: {exc}", line) from None


def derive_time_features(ts, line=None):
    """Return ``(hour, weekday, is_weekend)`` with Monday as weekday 0."""
    dt = parse_timestamp(ts, line)
    wd = dt.weekday()
    return dt.hour, wd, wd >= 5


# -- records and CSV -------------------------------------------------------

@dataclass(frozen=True)
class RawRecord:
    timestamp: str
    values: dict
    label: int


@dataclass(frozen=True)
class CsvSchema:
    """Which CSV columns hold the label and timestamp, and which to ignore.

    ``categorical=None`` means every remaining column is a categorical field.
    """

    label_column: str = "click"
    timestamp_column: str = "hour"
    categorical: tuple = None
    drop_columns: tuple = ("id",)
    time_features: bool = True


def load_csv(path, schema=None, on_error="abort"):
    """Parse an Avazu-format CSV into records, preserving file order.

    ``on_error`` is ``"abort"`` (raise ``ParseError``) or ``"skip"`` (log and
    drop the row).  Line numbers count the header as line 1.
    """
    schema = schema or CsvSchema()
    if on_error not in ("abort", "skip"):
        raise ConfigurationError(f"on_error must be 'abort' or 'skip', got {on_error!r}")
    records = []
    skipped = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: missing header row", 1)
        for col in (schema.label_column, schema.timestamp_column, *(schema.categorical or ())):
            if col not in header:
                raise ParseError(f"{path}: missing column {col!r}", 1)
        pos = {name: i for i, name in enumerate(header)}
        if schema.categorical is None:
            skip = {schema.label_column, schema.timestamp_column, *schema.drop_columns}
            fields = [c for c in header if c not in skip]
        else:
            fields = list(schema.categorical)
        for line, row in enumerate(reader, start=2):
            try:
                if len(row) != len(header):
                    raise ParseError(f"expected {len(header)} columns, got {len(row)}", line)
                label = row[pos[schema.label_column]]
                if label not in ("0", "1"):
                    raise ParseError(f"bad label {label!r}", line)
                ts = row[pos[schema.timestamp_column]]
                parse_timestamp(ts, line)
            except ParseError:
                if on_error == "abort":
                    raise
                skipped += 1
                log.warning("skipping line %d of %s", line, path)
                continue
            records.append(RawRecord(ts, {f: row[pos[f]] for f in fields}, int(label)))
    positives = sum(r.label for r in records)
    log.info("loaded %d rows from %s (%d positive, %d skipped)", len(records), path, positives, skipped)
    return records


def write_csv(records, path, label_column="click", timestamp_column="hour"):
    fields = list(records[0].values) if records else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([label_column, timestamp_column, *fields])
        for r in records:
            w.writerow([r.label, r.timestamp, *(r.values[f] for f in fields)])


# -- vocabulary ------------------------------------------------------------

def record_features(record, time_features=True):
    """Ordered ``(field, value)`` pairs of a record, time fields last."""
    pairs = list(record.values.items())
    if time_features:
        hour, wd, weekend = derive_time_features(record.timestamp)
        pairs += [("hour", str(hour)), ("weekday", str(wd)), ("is_weekend", str(int(weekend)))]
    return pairs


@dataclass
class Vocabulary:
    """Shared index space over ``(field, value)`` pairs; index 0 is out-of-vocabulary."""

    fields: tuple
    index: dict
    min_frequency: int = 2
    time_features: bool = True

    @property
    def size(self):
        return len(self.index) + 1

    def encode(self, record):
        pairs = record_features(record, self.time_features)
        return [self.index.get(p, OOV_INDEX) for p in pairs]

    def to_json(self):
        return {
            "fields": list(self.fields),
            "min_frequency": self.min_frequency,
            "time_features": self.time_features,
            "entries": [[f, v, i] for (f, v), i in self.index.items()],
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            fields=tuple(obj["fields"]),
            index={(f, v): i for f, v, i in obj["entries"]},
            min_frequency=obj["min_frequency"],
            time_features=obj["time_features"],
        )


def build_vocab(records, min_frequency=2, time_features=True):
    """Index every ``(field, value)`` seen at least ``min_frequency`` times.

    Indices start at 1 and follow first-occurrence order in ``records``.
    """
    if min_frequency < 1:
        raise ConfigurationError("min_frequency must be >= 1")
    counts = Counter()
    order = []
    fields = None
    for r in records:
        pairs = record_features(r, time_features)
        if fields is None:
            fields = tuple(f for f, _ in pairs)
        for p in pairs:
            if p not in counts:
                order.append(p)
            counts[p] += 1
    index = {}
    for p in order:
        if counts[p] >= min_frequency:
            index[p] = len(index) + 1
    return Vocabulary(fields or (), index, min_frequency, time_features)


# -- day-indexed dataset ---------------------------------------------------

@dataclass(frozen=True)
class Partition:
    features: np.ndarray
    labels: np.ndarray
    days: np.ndarray

    def __len__(self):
        return len(self.labels)


@dataclass
class DayIndexedDataset:
    """Chronologically ordered, encoded samples with train/val/test boundaries.

    ``days`` holds each sample's calendar-day order over the whole dataset
    (oldest = 1); for training samples this is the day index ``t`` in 1..N.
    """

    features: np.ndarray
    labels: np.ndarray
    timestamps: np.ndarray
    days: np.ndarray
    train_end: int
    val_end: int
    n_days: int
    vocab: Vocabulary

    @property
    def field_names(self):
        return self.vocab.fields

    @property
    def field_count(self):
        return self.features.shape[1]

    def _slice(self, lo, hi):
        return Partition(self.features[lo:hi], self.labels[lo:hi], self.days[lo:hi])

    @property
    def train(self):
        return self._slice(0, self.train_end)

    @property
    def val(self):
        return self._slice(self.train_end, self.val_end)

    @property
    def test(self):
        return self._slice(self.val_end, len(self.labels))

    def partition(self, name):
        if name not in ("train", "val", "test"):
            raise ConfigurationError(f"unknown partition {name!r}")
        return getattr(self, name)

    def save(self, directory):
        """Write ``dataset.npz`` (arrays + boundaries) and ``vocab.json``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.savez(
            directory / "dataset.npz",
            features=self.features, labels=self.labels, timestamps=self.timestamps,
            days=self.days, bounds=np.array([self.train_end, self.val_end, self.n_days]),
        )
        (directory / "vocab.json").write_text(json.dumps(self.vocab.to_json()))

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        with np.load(directory / "dataset.npz") as z:
            train_end, val_end, n_days = (int(v) for v in z["bounds"])
            arrays = {k: z[k] for k in ("features", "labels", "timestamps", "days")}
        vocab = Vocabulary.from_json(json.loads((directory / "vocab.json").read_text()))
        return cls(**arrays, train_end=train_end, val_end=val_end, n_days=n_days, vocab=vocab)

    def split_summary(self):
        parts = {}
        for name in ("train", "val", "test"):
            p = self.partition(name)
            ts = self.timestamps[{"train": slice(0, self.train_end),
                                  "val": slice(self.train_end, self.val_end),
                                  "test": slice(self.val_end, None)}[name]]
            parts[name] = {
                "samples": len(p),
                "positives": int(p.labels.sum()),
                "first_timestamp": int(ts.min()) if len(ts) else None,
                "last_timestamp": int(ts.max()) if len(ts) else None,
            }
        return {"n_days": self.n_days, "vocab_size": self.vocab.size,
                "fields": list(self.field_names), "partitions": parts}


def _snap(cut, keys):
    while 0 < cut < len(keys) and keys[cut] == keys[cut - 1]:
        cut += 1
    return cut


def chronological_split(records, ratios=(8, 1, 1), min_frequency=2, day_aligned=False,
                        time_features=True):
    """Sort by timestamp, cut into train/val/test and encode against a train vocabulary.

    Cuts are placed at the sample-count ratio and then moved forward past any
    run of equal timestamps (or equal calendar days when ``day_aligned``), so
    partitions never share a timestamp.
    """
    records = list(records)
    if not records:
        raise DataError("cannot split an empty record set")
    if len(ratios) != 3 or min(ratios) < 0 or sum(ratios) <= 0:
        raise ConfigurationError(f"ratios must be three non-negative numbers, got {ratios}")
    for i, r in enumerate(records):
        parse_timestamp(r.timestamp, i + 1)
    order = sorted(range(len(records)), key=lambda i: records[i].timestamp)
    records = [records[i] for i in order]
    n = len(records)
    stamps = [r.timestamp for r in records]
    day_keys = [s[:6] for s in stamps]
    keys = day_keys if day_aligned else stamps

    total = float(sum(ratios))
    train_end = _snap(int(n * ratios[0] / total), keys)
    val_end = _snap(max(train_end, int(n * (ratios[0] + ratios[1]) / total)), keys)

    distinct_days = sorted(set(day_keys))
    day_rank = {d: i + 1 for i, d in enumerate(distinct_days)}
    days = np.array([day_rank[d] for d in day_keys], dtype=np.int64)
    n_days = int(days[train_end - 1]) if train_end else 0

    vocab = build_vocab(records[:train_end], min_frequency, time_features)
    features = np.array([vocab.encode(r) for r in records], dtype=np.int64)
    labels = np.array([r.label for r in records], dtype=np.int8)
    if np.any((labels != 0) & (labels != 1)):
        raise DataError("labels must be 0 or 1")
    timestamps = np.array([int(s) for s in stamps], dtype=np.int64)
    return DayIndexedDataset(features, labels, timestamps, days, train_end, val_end, n_days, vocab)


# -- synthetic concept drift -----------------------------------------------

# Rotation per day at drift_rate = 1.
MAX_DAILY_ROTATION = math.pi / 10
SYNTH_START = date(2014, 10, 21)


@dataclass(frozen=True)
class DriftConfig:
    """Synthetic CTR stream whose latent logistic model rotates day by day.

    Per-value coefficients for day ``d`` are ``cos(a_d) u + sin(a_d) v`` plus
    small Gaussian noise, where ``u`` and ``v`` are orthogonal directions and
    ``a_d = drift_rate * MAX_DAILY_ROTATION * (d - 1)``.
    """

    n_days: int = 10
    samples_per_day: int = 5000
    field_count: int = 8
    cardinality: int = 50
    drift_rate: float = 0.5
    base_ctr: float = 0.2
    seed: int = 0
    signal: float = 2.0
    noise: float = 0.05

    def __post_init__(self):
        if self.n_days < 1 or self.samples_per_day < 1 or self.field_count < 1 or self.cardinality < 1:
            raise ConfigurationError("n_days, samples_per_day, field_count, cardinality must be >= 1")
        if not 0.0 <= self.drift_rate <= 1.0:
            raise ConfigurationError(f"drift_rate must be in [0, 1], got {self.drift_rate}")
        if not 0.0 < self.base_ctr < 1.0:
            raise ConfigurationError(f"base_ctr must be in (0, 1), got {self.base_ctr}")


@dataclass
class DriftData:
    records: list
    dataset: DayIndexedDataset
    coefficients: np.ndarray  # (n_days, field_count, cardinality)
    bias: float
    config: DriftConfig = field(repr=False, default=None)

    def truth_json(self):
        return {
            "config": asdict(self.config),
            "bias": self.bias,
            "coefficients": self.coefficients.round(12).tolist(),
        }


def drift_coefficients(cfg, rng):
    size = cfg.field_count * cfg.cardinality
    basis = rng.standard_normal((size, 2))
    q, _ = np.linalg.qr(basis)
    # orthonormal columns rescaled so each coefficient has std ~ signal / sqrt(fields)
    u, v = (q * math.sqrt(size) * cfg.signal / math.sqrt(cfg.field_count)).T
    coefs = []
    for d in range(cfg.n_days):
        a = cfg.drift_rate * MAX_DAILY_ROTATION * d
        c = math.cos(a) * u + math.sin(a) * v
        if cfg.noise:
            c = c + cfg.noise * rng.standard_normal(size)
        coefs.append(c.reshape(cfg.field_count, cfg.cardinality))
    return np.stack(coefs)


def generate_drift(cfg):
    rng = np.random.default_rng(cfg.seed)
    coefs = drift_coefficients(cfg, rng)
    if cfg.drift_rate == 0:
        coefs[:] = coefs[0]
    bias = math.log(cfg.base_ctr / (1.0 - cfg.base_ctr))
    names = [f"f{j}" for j in range(cfg.field_count)]
    records = []
    rows = np.arange(cfg.field_count)
    for d in range(cfg.n_days):
        day = SYNTH_START + timedelta(days=d)
        values = rng.integers(0, cfg.cardinality, size=(cfg.samples_per_day, cfg.field_count))
        z = bias + coefs[d][rows, values].sum(axis=1)
        labels = rng.random(cfg.samples_per_day) < 1.0 / (1.0 + np.exp(-z))
        for i in range(cfg.samples_per_day):
            hour = i * 24 // cfg.samples_per_day
            ts = f"{day:%y%m%d}{hour:02d}"
            records.append(RawRecord(ts, {n: str(int(x)) for n, x in zip(names, values[i])},
                                     int(labels[i])))
    return DriftData(records, chronological_split(records), coefs, bias, cfg)
