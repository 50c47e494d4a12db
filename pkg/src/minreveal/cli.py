"""Command-line surface.

Subcommands: fit-prior, train, audit (batch disclosure over a test split),
opt (brute-force minimum core sets), reveal (interactive single-sample
session), bench (protocol sweep), report (merge audit runs, render figures).

Exit codes: 0 success, 2 usage/config error, 3 runtime abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench, coreset, data_io, engine, gaussian, models, report

USAGE_ERROR = 2
RUNTIME_ERROR = 3


def _provenance(cfg: engine.EngineConfig) -> str:
    return (f"# seed={cfg.seed} samples={cfg.n_samples} delta={cfg.delta:g} "
            f"grid_delta={cfg.grid_delta:g} jitter={cfg.jitter:g}")


def _parse_sensitive(raw: str | None, seed: int):
    if raw is None:
        return None
    try:
        return {"k": int(raw), "seed": seed}
    except ValueError:
        return [name.strip() for name in raw.split(",") if name.strip()]


def _load_dataset(args, seed_for_pick: int) -> tuple[data_io.Dataset, dict]:
    """Dataset (path or the literal 'synthetic') plus the effective run config."""
    sensitive = _parse_sensitive(getattr(args, "sensitive", None), seed_for_pick)
    if args.dataset == "synthetic":
        cfg = data_io.load_run_config(args.config) if args.config else \
            {"label": "label", "train_fraction": 0.7, "seed": 0, "sensitive": None}
        ds = bench.synthetic_dataset()
        sens = sensitive if sensitive is not None else cfg.get("sensitive")
        if isinstance(sens, dict):
            fs = data_io.pick_sensitive(ds.feature_space, int(sens["k"]), int(sens["seed"]))
            ds = replace(ds, feature_space=fs)
        elif sens:
            fs = ds.feature_space.with_sensitive(
                [ds.feature_space.index_of(n) for n in sens])
            ds = replace(ds, feature_space=fs)
        return ds, cfg
    if not args.config:
        raise data_io.SchemaError("--config is required for CSV datasets")
    cfg = data_io.load_run_config(args.config)
    sens = sensitive if sensitive is not None else cfg.get("sensitive")
    ds = data_io.load_csv(args.dataset, cfg["label"], sensitive=sens)
    return ds, cfg


def _split_from_config(ds: data_io.Dataset, cfg: dict):
    return data_io.split(ds, float(cfg["train_fraction"]), int(cfg["seed"]))


def _check_model(model: models.Model, ds: data_io.Dataset) -> None:
    if model.n_features != ds.feature_space.n_features:
        raise data_io.SchemaError(
            f"model expects {model.n_features} features, dataset has "
            f"{ds.feature_space.n_features}")
    if model.classes != ds.n_classes:
        raise data_io.SchemaError(
            f"model has {model.classes} classes, dataset has {ds.n_classes}")


def _engine_config(args) -> engine.EngineConfig:
    return engine.EngineConfig(
        delta=args.delta,
        n_samples=args.samples,
        seed=args.seed,
        grid_delta=args.grid_delta,
        jitter=args.jitter,
    )


def cmd_fit_prior(args) -> int:
    ds, cfg = _load_dataset(args, int(getattr(args, "seed", 0) or 0))
    train, _ = _split_from_config(ds, cfg)
    prior = gaussian.fit_prior(train)
    data_io.save_prior(prior, args.out)
    print(f"prior over {prior.dim} features written to {args.out}")
    return 0


def cmd_train(args) -> int:
    ds, cfg = _load_dataset(args, args.seed)
    train, test = _split_from_config(ds, cfg)
    if args.kind == "linear":
        model = models.train_logistic(
            train, lr=args.lr or 0.1, epochs=args.epochs or 200,
            batch=args.batch, seed=args.seed)
    else:
        model = models.train_mlp(
            train, lr=args.lr or 0.001, epochs=args.epochs or 300,
            batch=args.batch, seed=args.seed)
    data_io.save_model(model, args.out)
    print(f"# seed={args.seed} kind={args.kind}")
    print(f"train_accuracy={models.accuracy(model, train):.6f}")
    print(f"test_accuracy={models.accuracy(model, test):.6f}")
    print(f"model written to {args.out}")
    return 0


def _summary_lines(records: list[dict], n_sensitive: int) -> list[str]:
    hits = [r["repr_label"] == r["true_label"] for r in records]
    base = [r["baseline_label"] == r["true_label"] for r in records]
    leaks = [r["leakage"] for r in records]
    lines = [
        f"samples={len(records)}",
        f"accuracy={float(np.mean(hits)):.6f}",
        f"baseline_accuracy={float(np.mean(base)):.6f}",
        f"mean_leakage={float(np.mean(leaks)):.6f}",
    ]
    counts = np.bincount(leaks, minlength=n_sensitive + 1)
    lines.append("histogram=" + " ".join(f"{k}:{c}" for k, c in enumerate(counts)))
    return lines


def cmd_audit(args) -> int:
    ds, cfg = _load_dataset(args, args.seed)
    if not ds.feature_space.sensitive_idx:
        raise data_io.SchemaError("no sensitive features configured; nothing to audit")
    model = data_io.load_model(args.model)
    _check_model(model, ds)
    train, test = _split_from_config(ds, cfg)
    prior = data_io.load_prior(args.prior) if args.prior else gaussian.fit_prior(train)
    ecfg = _engine_config(args)
    print(_provenance(ecfg))

    outcomes = engine.audit_rows(model, prior, test, ecfg)
    fs = test.feature_space
    baseline = models.predict(model, test.rows)
    records = [
        data_io.audit_record(
            i, ecfg.delta, [fs.names[j] for j in res.revealed],
            res.repr_label, int(test.labels[i]), int(baseline[i]), res.method)
        for i, (res, _) in enumerate(outcomes)
    ]
    data_io.write_audit_records(records, args.out)
    for line in _summary_lines(records, len(fs.sensitive_idx)):
        print(line)
    print(f"audit written to {args.out}")
    return 0


def cmd_opt(args) -> int:
    ds, cfg = _load_dataset(args, args.seed)
    if not ds.feature_space.sensitive_idx:
        raise data_io.SchemaError("no sensitive features configured")
    model = data_io.load_model(args.model)
    _check_model(model, ds)
    _, test = _split_from_config(ds, cfg)
    fs = test.feature_space
    print(f"# seed={args.seed} grid_delta={args.grid_delta:g}")
    baseline = models.predict(model, test.rows)
    records = []
    for i in range(len(test)):
        res = coreset.opt_min_core(
            model, test.rows[i], fs.sensitive_idx, delta_robust=args.grid_delta)
        records.append(data_io.audit_record(
            i, 0.0, [fs.names[j] for j in res.revealed],
            res.repr_label, int(test.labels[i]), int(baseline[i]), res.method))
    data_io.write_audit_records(records, args.out)
    for line in _summary_lines(records, len(fs.sensitive_idx)):
        print(line)
    print(f"minimum core sets written to {args.out}")
    return 0


def _read_public_values(source: str, fs: data_io.FeatureSpace, raw: bool,
                        norm_params) -> np.ndarray:
    path = Path(source)
    payload = json.loads(path.read_text()) if path.is_file() else json.loads(source)
    if not isinstance(payload, dict):
        raise data_io.SchemaError("--public must be a JSON object of name: value")
    missing = [fs.names[i] for i in fs.public_idx if fs.names[i] not in payload]
    if missing:
        raise data_io.SchemaError(f"missing public values for {missing}")
    vals = []
    for i in fs.public_idx:
        v = float(payload[fs.names[i]])
        if raw:
            lo, hi = norm_params[i]
            v = float(np.clip(2.0 * (v - lo) / (hi - lo) - 1.0, -1.0, 1.0))
        elif not -1.0 <= v <= 1.0:
            raise data_io.SchemaError(
                f"public value for {fs.names[i]!r} outside [-1, 1] (use --raw?)")
        vals.append(v)
    return np.array(vals)


def _prompt_value(name: str, raw: bool, norm_param) -> float:
    while True:
        suffix = " (raw units)" if raw else " in [-1, 1]"
        line = input(f"reveal {name!r}{suffix}: ")
        try:
            v = float(line)
        except ValueError:
            print(f"could not parse {line!r} as a number; try again")
            continue
        if raw:
            lo, hi = norm_param
            return float(np.clip(2.0 * (v - lo) / (hi - lo) - 1.0, -1.0, 1.0))
        if -1.0 <= v <= 1.0:
            return v
        print("value must be within [-1, 1]; try again")


def cmd_reveal(args) -> int:
    ds, cfg = _load_dataset(args, args.seed)
    if not ds.feature_space.sensitive_idx:
        raise data_io.SchemaError("no sensitive features configured")
    model = data_io.load_model(args.model)
    _check_model(model, ds)
    train, _ = _split_from_config(ds, cfg)
    prior = data_io.load_prior(args.prior) if args.prior else gaussian.fit_prior(train)
    fs = train.feature_space
    ecfg = _engine_config(args)
    print(_provenance(ecfg))

    public = _read_public_values(args.public, fs, args.raw, model.norm_params)
    state = engine.init_state(fs, public)
    try:
        while True:
            res = engine.certify(model, prior, state, ecfg)
            ld = engine.label_distribution(model, prior, state, ecfg)
            print(f"certainty: {ld.confidence:.4f} (label {ld.top_label})")
            if res.is_core:
                names = [fs.names[j] for j in state.revealed]
                print(f"prediction {res.repr_label}, {len(names)} features revealed "
                      f"({', '.join(names) if names else 'none'}), delta={ecfg.delta:g}")
                return 0
            j, scores = engine.choose_feature(state, model, prior, ecfg)
            value = _prompt_value(fs.names[j], args.raw, model.norm_params[j])
            state.reveal(j, value, scores)
    except EOFError:
        names = [fs.names[j] for j in state.revealed]
        print(f"session aborted: input ended after {len(names)} reveals "
              f"({', '.join(names) if names else 'none'})")
        return RUNTIME_ERROR


def cmd_bench(args) -> int:
    ds, _ = _load_dataset(args, args.seed)
    scfg = bench.SweepConfig(
        s_sizes=tuple(int(s) for s in args.s_sizes.split(",")),
        deltas=tuple(float(d) for d in args.deltas.split(",")),
        repetitions=args.repetitions,
        model_kind=args.kind,
        seed=args.seed,
        n_samples=args.samples,
        grid_delta=args.grid_delta,
        jitter=args.jitter,
        include_opt=not args.no_opt,
    )
    print(f"# seed={args.seed} samples={args.samples} deltas={args.deltas} "
          f"grid_delta={args.grid_delta:g} jitter={args.jitter:g}")
    result = bench.run_sweep(ds, scfg)
    bench.emit(result, args.format, args.out)
    for row in result.rows:
        delta = "-" if row["delta"] is None else f"{row['delta']:g}"
        print(f"s={row['s']} method={row['method']} delta={delta} "
              f"accuracy={row['accuracy']:.4f} leakage={row['leakage_mean']:.3f}")
    print(f"sweep written to {args.out}")
    return 0


def cmd_report(args) -> int:
    out = report.generate_report(args.inputs, args.out)
    print(f"summary with {out['rows']} rows written to {out['summary']}")
    for fig in out["figures"]:
        print(f"figure written to {fig}")
    return 0


def _add_dataset_args(sub, config_required: bool = False) -> None:
    sub.add_argument("--dataset", required=True,
                     help="CSV path or the literal 'synthetic'")
    sub.add_argument("--config", required=config_required,
                     help="run config JSON (label, sensitive, train_fraction, seed)")
    sub.add_argument("--sensitive", default=None,
                     help="override: a count k or comma-separated feature names")


def _add_engine_args(sub, require_seed: bool) -> None:
    sub.add_argument("--delta", type=float, default=0.0)
    sub.add_argument("--samples", type=int, default=1000)
    sub.add_argument("--grid-delta", dest="grid_delta", type=float, default=0.2)
    sub.add_argument("--jitter", type=float, default=1e-6)
    sub.add_argument("--seed", type=int, required=require_seed,
                     default=None if require_seed else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minreveal",
        description="Audit and minimize per-sample sensitive-feature disclosure.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("fit-prior", help="fit the feature prior on the train split")
    _add_dataset_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_prior)

    p = subs.add_parser("train", help="train a classifier on the train split")
    _add_dataset_args(p)
    p.add_argument("--kind", choices=("linear", "mlp"), default="linear")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("audit", help="batch disclosure over the test split")
    _add_dataset_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--prior", default=None)
    _add_engine_args(p, require_seed=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audit)

    p = subs.add_parser("opt", help="brute-force minimum pure core sets")
    _add_dataset_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--grid-delta", dest="grid_delta", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_opt)

    p = subs.add_parser("reveal", help="interactive single-sample session")
    _add_dataset_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--prior", default=None)
    p.add_argument("--public", required=True,
                   help="JSON object of public name: value, inline or a file path")
    p.add_argument("--raw", action="store_true",
                   help="values are in raw units; apply the stored normalization")
    _add_engine_args(p, require_seed=False)
    p.set_defaults(func=cmd_reveal)

    p = subs.add_parser("bench", help="baseline / opt / sequential sweep")
    _add_dataset_args(p)
    p.add_argument("--s-sizes", dest="s_sizes", default="2,3,4,5,6,7")
    p.add_argument("--deltas", default="0,0.01,0.05,0.1")
    p.add_argument("--repetitions", type=int, default=100)
    p.add_argument("--kind", choices=("linear", "mlp"), default="linear")
    p.add_argument("--no-opt", action="store_true")
    _add_engine_args(p, require_seed=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = subs.add_parser("report", help="merge audit runs; write summary CSV and figures")
    p.add_argument("inputs", nargs="+", help="audit JSONL files")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (data_io.SchemaError, data_io.CsvParseError, data_io.NormalizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (engine.OracleError, gaussian.NumericalError, models.TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
