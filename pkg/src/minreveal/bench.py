"""Benchmark harness: full-disclosure baseline vs brute-force optimum vs the
sequential engine, swept over sensitive-set sizes and deltas.

Also provides the bundled synthetic dataset: correlated Gaussian features
with labels from a fixed linear teacher plus label noise, fully seeded so
every reported number is reproducible.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import coreset, data_io, engine, gaussian, models

SYNTH_SEED = 20230217
SYNTH_CORRELATION = 0.3
SYNTH_LABEL_NOISE = 0.05

BASELINE = "baseline"
OPT = "opt"
SEQUENTIAL = "sequential"

OPT_SWEEP_CAP = 12


def synthetic_dataset(
    n_samples: int = 2000,
    n_features: int = 8,
    seed: int = SYNTH_SEED,
    correlation: float = SYNTH_CORRELATION,
    label_noise: float = SYNTH_LABEL_NOISE,
) -> data_io.Dataset:
    """Correlated Gaussian features, binary labels from a fixed linear teacher
    with a flipped-label fraction. Deterministic under ``seed``."""
    rng = np.random.default_rng(seed)
    cov = np.full((n_features, n_features), correlation)
    np.fill_diagonal(cov, 1.0)
    raw = rng.multivariate_normal(np.zeros(n_features), cov, size=n_samples)
    teacher = rng.normal(size=n_features)
    labels = (raw @ teacher >= 0.0).astype(int)
    flip = rng.random(n_samples) < label_noise
    labels[flip] = 1 - labels[flip]
    names = [f"x{i}" for i in range(n_features)]
    return data_io.make_dataset(raw, labels, names)


@dataclass(frozen=True)
class SweepConfig:
    """Protocol sweep: sizes of the sensitive set, deltas, repetitions."""

    s_sizes: tuple[int, ...] = (2, 3, 4, 5, 6, 7)
    deltas: tuple[float, ...] = (0.0, 0.01, 0.05, 0.1)
    repetitions: int = 100
    model_kind: str = "linear"
    seed: int = 0
    train_fraction: float = 0.7
    n_samples: int = 1000
    grid_delta: float = 0.2
    jitter: float = 1e-6
    include_opt: bool = True
    opt_cap: int = OPT_SWEEP_CAP
    epochs: int | None = None
    lr: float | None = None
    batch: int = 32

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")
        if any(not 0.0 <= d < 0.5 for d in self.deltas):
            raise ValueError("every delta must lie in [0, 0.5)")
        if self.model_kind not in ("linear", "mlp"):
            raise ValueError(f"unknown model kind {self.model_kind!r}")


@dataclass
class SweepResult:
    """Aggregated rows, one per (|S|, delta, method)."""

    rows: list[dict] = field(default_factory=list)

    def row(self, s: int, method: str, delta: float | None) -> dict | None:
        for r in self.rows:
            if r["s"] == s and r["method"] == method and r["delta"] == delta:
                return r
        return None


def _train(kind: str, train: data_io.Dataset, seed: int, cfg: SweepConfig) -> models.Model:
    if kind == "linear":
        return models.train_logistic(
            train, lr=cfg.lr or 0.1, epochs=cfg.epochs or 200, batch=cfg.batch, seed=seed)
    return models.train_mlp(
        train, lr=cfg.lr or 0.001, epochs=cfg.epochs or 300, batch=cfg.batch, seed=seed)


def run_sweep(dataset: data_io.Dataset, cfg: SweepConfig) -> SweepResult:
    """Per repetition: draw a sensitive set, split, train, then measure the
    baseline, the brute-force optimum (when |S| fits the cap) and the engine
    at every delta over the test split. Means are across repetitions."""
    acc: dict[tuple, dict] = {}

    def bucket(s: int, method: str, delta: float | None) -> dict:
        key = (s, method, delta)
        if key not in acc:
            acc[key] = {
                "s": s, "method": method, "delta": delta,
                "accuracy_sum": 0.0, "leakage_sum": 0.0, "n": 0,
                "runtime_s": 0.0, "histogram": np.zeros(s + 1, dtype=int),
            }
        return acc[key]

    for s in cfg.s_sizes:
        for rep in range(cfg.repetitions):
            rep_seed = engine.derive_seed(cfg.seed, s, rep)
            fs = data_io.pick_sensitive(dataset.feature_space, s, rep_seed)
            ds = replace(dataset, feature_space=fs)
            train, test = data_io.split(ds, cfg.train_fraction, engine.derive_seed(rep_seed, 1))
            model = _train(cfg.model_kind, train, engine.derive_seed(rep_seed, 2), cfg)
            prior = gaussian.fit_prior(train)
            truth = test.labels
            baseline_labels = models.predict(model, test.rows)

            b = bucket(s, BASELINE, None)
            b["accuracy_sum"] += float(np.mean(baseline_labels == truth))
            b["leakage_sum"] += float(s)
            b["n"] += 1
            b["histogram"][s] += len(test)

            if cfg.include_opt and s > cfg.opt_cap and rep == 0:
                warnings.warn(
                    f"skipping the brute-force optimum at |S|={s}: exceeds the "
                    f"enumeration cap {cfg.opt_cap}", stacklevel=2)
            if cfg.include_opt and s <= cfg.opt_cap:
                t0 = time.perf_counter()
                o = bucket(s, OPT, None)
                leaks, hits = [], []
                for i in range(len(test)):
                    res = coreset.opt_min_core(
                        model, test.rows[i], fs.sensitive_idx,
                        delta_robust=cfg.grid_delta)
                    leaks.append(len(res.revealed))
                    hits.append(res.repr_label == truth[i])
                    o["histogram"][len(res.revealed)] += 1
                o["accuracy_sum"] += float(np.mean(hits))
                o["leakage_sum"] += float(np.mean(leaks))
                o["n"] += 1
                o["runtime_s"] += time.perf_counter() - t0

            for delta in cfg.deltas:
                ecfg = engine.EngineConfig(
                    delta=delta, n_samples=cfg.n_samples, seed=rep_seed,
                    grid_delta=cfg.grid_delta, jitter=cfg.jitter)
                t0 = time.perf_counter()
                outcomes = engine.audit_rows(model, prior, test, ecfg)
                p = bucket(s, SEQUENTIAL, delta)
                leaks = [engine.leakage(st) for _, st in outcomes]
                hits = [res.repr_label == truth[i] for i, (res, _) in enumerate(outcomes)]
                for l in leaks:
                    p["histogram"][l] += 1
                p["accuracy_sum"] += float(np.mean(hits))
                p["leakage_sum"] += float(np.mean(leaks))
                p["n"] += 1
                p["runtime_s"] += time.perf_counter() - t0

    rows = []
    for key in sorted(acc, key=lambda k: (k[0], k[1], -1.0 if k[2] is None else k[2])):
        b = acc[key]
        n = b["n"]
        rows.append({
            "s": b["s"], "method": b["method"], "delta": b["delta"],
            "accuracy": b["accuracy_sum"] / n,
            "leakage_mean": b["leakage_sum"] / n,
            "leakage_frac": b["leakage_sum"] / n / b["s"],
            "runtime_s": b["runtime_s"],
            "histogram": b["histogram"].tolist(),
        })
    return SweepResult(rows)


def histogram(records: Sequence[dict], delta: float, n_sensitive: int) -> np.ndarray:
    """Counts of audit records by core-set size 0..n_sensitive at one delta."""
    counts = np.zeros(n_sensitive + 1, dtype=int)
    for rec in records:
        if rec["delta"] == delta:
            counts[rec["leakage"]] += 1
    return counts


_METRICS = ("accuracy", "leakage_mean", "leakage_frac", "runtime_s")


def emit(result: SweepResult, fmt: str, path: str | Path) -> None:
    """Write the sweep as a plot-ready long table: one row per
    (|S|, delta, method, metric), histogram bins included as hist_<k>."""
    path = Path(path)
    long_rows = []
    for r in result.rows:
        metrics = {m: r[m] for m in _METRICS}
        metrics.update({f"hist_{k}": v for k, v in enumerate(r["histogram"])})
        for metric, value in metrics.items():
            long_rows.append({
                "s": r["s"], "delta": r["delta"], "method": r["method"],
                "metric": metric, "value": value,
            })
    if fmt == "csv":
        import csv

        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["s", "delta", "method", "metric", "value"])
            for row in long_rows:
                delta = "" if row["delta"] is None else repr(float(row["delta"]))
                writer.writerow([row["s"], delta, row["method"], row["metric"],
                                 repr(float(row["value"]))])
    elif fmt == "jsonl":
        lines = [json.dumps(row, separators=(",", ":")) for row in long_rows]
        path.write_text("\n".join(lines) + ("\n" if lines else ""))
    else:
        raise ValueError(f"unknown emit format {fmt!r}")
