"""Tabular data ingestion, feature partitioning, and model/result persistence.

Feature values are min-max normalized into [-1, 1]; the normalization
parameters travel with the data so that test splits, saved models, and
interactive sessions all share the training coordinate system. Values that
fall outside the training range are clamped to the box.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class SchemaError(ValueError):
    """A required column or config field is missing or inconsistent."""


class CsvParseError(ValueError):
    """A cell could not be parsed; carries 1-based row and column context."""

    def __init__(self, message: str, row: int, column: str):
        super().__init__(f"{message} (row {row}, column {column!r})")
        self.row = row
        self.column = column


class NormalizationError(ValueError):
    """Degenerate normalization parameters (e.g. a constant column)."""


@dataclass(frozen=True)
class FeatureSpace:
    """Feature names, the public/sensitive partition, and per-feature ranges.

    ``public_idx`` and ``sensitive_idx`` are disjoint and together cover all
    feature positions. ``norm_params`` holds the (min, max) of each feature
    in raw units, as measured on the data that defined the coordinate system.
    """

    names: tuple[str, ...]
    public_idx: tuple[int, ...]
    sensitive_idx: tuple[int, ...]
    norm_params: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        d = len(self.names)
        pub, sens = set(self.public_idx), set(self.sensitive_idx)
        if pub & sens:
            raise SchemaError("public and sensitive feature sets overlap")
        if pub | sens != set(range(d)):
            raise SchemaError("public and sensitive sets must cover all features")
        if len(self.norm_params) != d:
            raise SchemaError("norm_params length does not match feature count")
        for name, (lo, hi) in zip(self.names, self.norm_params):
            if not lo < hi:
                raise NormalizationError(f"feature {name!r} has min >= max ({lo} >= {hi})")

    @property
    def n_features(self) -> int:
        return len(self.names)

    def with_sensitive(self, sensitive_idx: Sequence[int]) -> "FeatureSpace":
        sens = tuple(sorted(sensitive_idx))
        pub = tuple(i for i in range(len(self.names)) if i not in set(sens))
        return replace(self, public_idx=pub, sensitive_idx=sens)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None


@dataclass(frozen=True)
class Dataset:
    """Normalized rows in [-1, 1], integer labels in [0, n_classes), and the
    raw values the normalization was derived from (kept for re-splitting)."""

    rows: np.ndarray
    labels: np.ndarray
    feature_space: FeatureSpace
    n_classes: int
    raw: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        raw = np.asarray(self.raw, dtype=float)
        if rows.shape[0] < 2:
            raise SchemaError("dataset needs at least 2 rows")
        if self.n_classes < 2:
            raise SchemaError("dataset needs at least 2 classes")
        if rows.shape != raw.shape or rows.shape[0] != labels.shape[0]:
            raise SchemaError("rows, raw and labels are inconsistently shaped")
        if rows.shape[1] != self.feature_space.n_features:
            raise SchemaError("row width does not match the feature space")
        if np.any(rows < -1.0) or np.any(rows > 1.0):
            raise NormalizationError("normalized values escaped [-1, 1]")
        for arr, field in ((rows, "rows"), (labels, "labels"), (raw, "raw")):
            arr.setflags(write=False)
            object.__setattr__(self, field, arr)

    def __len__(self) -> int:
        return self.rows.shape[0]


def normalize(raw: np.ndarray, norm_params: Sequence[tuple[float, float]]) -> np.ndarray:
    """Min-max map each column into [-1, 1], clamping out-of-range values."""
    raw = np.asarray(raw, dtype=float)
    lo = np.array([p[0] for p in norm_params])
    hi = np.array([p[1] for p in norm_params])
    return np.clip(2.0 * (raw - lo) / (hi - lo) - 1.0, -1.0, 1.0)


def column_ranges(raw: np.ndarray, names: Sequence[str]) -> tuple[tuple[float, float], ...]:
    """Per-column (min, max); a constant column is a normalization error."""
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    for j, name in enumerate(names):
        if not lo[j] < hi[j]:
            raise NormalizationError(f"feature {name!r} is constant (value {lo[j]})")
    return tuple((float(a), float(b)) for a, b in zip(lo, hi))


def make_dataset(
    raw: np.ndarray,
    labels: np.ndarray,
    names: Sequence[str],
    sensitive_idx: Sequence[int] = (),
    norm_params: Sequence[tuple[float, float]] | None = None,
    n_classes: int | None = None,
) -> Dataset:
    """Build a Dataset from raw values, deriving (min, max) per column unless
    explicit ``norm_params`` are supplied (the test-split case)."""
    raw = np.asarray(raw, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if norm_params is None:
        norm_params = column_ranges(raw, names)
    else:
        norm_params = tuple((float(a), float(b)) for a, b in norm_params)
    fs = FeatureSpace(
        names=tuple(names),
        public_idx=tuple(i for i in range(len(names)) if i not in set(sensitive_idx)),
        sensitive_idx=tuple(sorted(sensitive_idx)),
        norm_params=norm_params,
    )
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    return Dataset(normalize(raw, norm_params), labels, fs, n_classes, raw)


def _sorted_distinct_labels(values: list[str]) -> list[str]:
    distinct = sorted(set(values))
    try:
        return sorted(set(values), key=float)
    except ValueError:
        return distinct


def load_csv(
    path: str | Path,
    label_column: str,
    sensitive: Sequence[str] | Mapping | None = None,
    norm_params: Sequence[tuple[float, float]] | None = None,
) -> Dataset:
    """Load a headed CSV with one label column and numeric feature columns.

    Labels are mapped to 0..L-1 in sorted order of the distinct raw labels
    (numeric sort when every label parses as a number, lexicographic
    otherwise). ``sensitive`` is either a list of feature names or a mapping
    {"k": int, "seed": int} for a random draw.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if label_column not in header:
            raise SchemaError(f"{path}: label column {label_column!r} not in header")
        label_pos = header.index(label_column)
        names = [h for i, h in enumerate(header) if i != label_pos]

        raw_rows: list[list[float]] = []
        raw_labels: list[str] = []
        for r, cells in enumerate(reader, start=1):
            if len(cells) != len(header):
                raise CsvParseError(
                    f"expected {len(header)} cells, got {len(cells)}", r, "<row>"
                )
            row = []
            for i, cell in enumerate(cells):
                if i == label_pos:
                    raw_labels.append(cell.strip())
                    continue
                try:
                    row.append(float(cell))
                except ValueError:
                    raise CsvParseError(
                        f"non-numeric value {cell!r}", r, header[i]
                    ) from None
            raw_rows.append(row)

    label_map = {v: k for k, v in enumerate(_sorted_distinct_labels(raw_labels))}
    labels = np.array([label_map[v] for v in raw_labels], dtype=int)

    sensitive_idx: Sequence[int] = ()
    draw: Mapping | None = None
    if isinstance(sensitive, Mapping):
        draw = sensitive
    elif sensitive:
        sensitive_idx = [_name_index(names, n) for n in sensitive]

    ds = make_dataset(np.array(raw_rows), labels, names, sensitive_idx, norm_params)
    if draw is not None:
        fs = pick_sensitive(ds.feature_space, int(draw["k"]), int(draw["seed"]))
        ds = replace(ds, feature_space=fs)
    return ds


def _name_index(names: Sequence[str], name: str) -> int:
    if name not in names:
        raise SchemaError(f"sensitive feature {name!r} not in header")
    return names.index(name)


def split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled train/test split.

    The train split is normalized with its own per-column ranges and the test
    split reuses those training ranges (clamped into the box).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(dataset)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(train_fraction * n))
    if n_train < 2 or n - n_train < 1:
        raise ValueError(f"split of {n} rows at fraction {train_fraction} leaves an empty side")
    tr, te = perm[:n_train], perm[n_train:]
    fs = dataset.feature_space
    train = make_dataset(
        dataset.raw[tr], dataset.labels[tr], fs.names, fs.sensitive_idx,
        n_classes=dataset.n_classes,
    )
    test = make_dataset(
        dataset.raw[te], dataset.labels[te], fs.names, fs.sensitive_idx,
        norm_params=train.feature_space.norm_params, n_classes=dataset.n_classes,
    )
    return train, test


def pick_sensitive(feature_space: FeatureSpace, k: int, seed: int) -> FeatureSpace:
    """Mark k features, drawn uniformly without replacement, as sensitive."""
    d = feature_space.n_features
    if not 1 <= k <= d:
        raise ValueError(f"sensitive count k={k} outside [1, {d}]")
    idx = np.random.default_rng(seed).choice(d, size=k, replace=False)
    return feature_space.with_sensitive(int(i) for i in idx)


def save_csv(dataset: Dataset, path: str | Path, label_column: str = "label") -> None:
    """Write raw feature values plus integer labels; loading the file back
    reproduces the normalized matrix bit for bit."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.feature_space.names) + [label_column])
        for row, label in zip(dataset.raw, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


# -- JSON persistence -----------------------------------------------------

def save_json(obj: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def save_model(model, path: str | Path) -> None:
    save_json(model.to_dict(), path)


def load_model(path: str | Path):
    from .models import LinearModel, MlpModel

    payload = load_json(path)
    kind = payload.get("kind")
    if kind == "linear":
        return LinearModel.from_dict(payload)
    if kind == "mlp":
        return MlpModel.from_dict(payload)
    raise SchemaError(f"unknown model kind {kind!r}")


def save_prior(prior, path: str | Path) -> None:
    save_json(prior.to_dict(), path)


def load_prior(path: str | Path):
    from .gaussian import GaussianPrior

    return GaussianPrior.from_dict(load_json(path))


AUDIT_FIELDS = (
    "sample_id", "delta", "revealed", "leakage",
    "repr_label", "true_label", "baseline_label", "method",
)


def audit_record(
    sample_id: int,
    delta: float,
    revealed_names: Sequence[str],
    repr_label: int,
    true_label: int,
    baseline_label: int,
    method: str,
) -> dict:
    """One per-sample audit row in the fixed key order used on disk."""
    return {
        "sample_id": int(sample_id),
        "delta": float(delta),
        "revealed": list(revealed_names),
        "leakage": len(revealed_names),
        "repr_label": int(repr_label),
        "true_label": int(true_label),
        "baseline_label": int(baseline_label),
        "method": method,
    }


def write_audit_records(records: Sequence[dict], path: str | Path) -> None:
    lines = [json.dumps(rec, separators=(",", ":")) for rec in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_audit_records(path: str | Path) -> list[dict]:
    records = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        missing = [f for f in AUDIT_FIELDS if f not in rec]
        if missing:
            raise SchemaError(f"{path}: audit record missing fields {missing}")
        records.append(rec)
    return records


def load_run_config(path: str | Path) -> dict:
    """Validate the run-config JSON: label column, sensitive field, split."""
    cfg = load_json(path)
    if "label" not in cfg:
        raise SchemaError(f"{path}: config needs a 'label' field")
    sens = cfg.get("sensitive")
    if sens is not None and not isinstance(sens, (list, dict)):
        raise SchemaError(f"{path}: 'sensitive' must be a list of names or {{k, seed}}")
    if isinstance(sens, dict) and not {"k", "seed"} <= set(sens):
        raise SchemaError(f"{path}: sensitive draw needs both 'k' and 'seed'")
    cfg.setdefault("train_fraction", 0.7)
    cfg.setdefault("seed", 0)
    if not 0.0 < float(cfg["train_fraction"]) < 1.0:
        raise SchemaError(f"{path}: train_fraction outside (0, 1)")
    return cfg
