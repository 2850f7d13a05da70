"""Operator entry point.

Subcommands: synth, preprocess, train, evaluate, compare, transfer,
gradcheck, inspect.  Every run writes a manifest echoing the resolved
configuration and seeds into the output directory; flag values override
config-file values.  Exit codes: 0 success, 2 configuration error,
3 training divergence, 4 file-format error, 1 check failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, checkpoint, datamodel, dsp
from .autodiff import run_battery
from .datamodel import (
    ContainerError, MaskSpec, SynthConfig, dataset_read,
    dataset_write, default_occipital_mask, default_synth_config, mask_read,
    synth_generate,
)
from .evaluation import (
    FoldFailure, comparison_text, compare_methods, make_folds, run_cv,
    to_json, transfer_csv, transfer_experiment, write_comparison_outputs,
    write_eval_outputs,
)
from .models import ModelSpec, TrainingDivergedError, build, save_model, train_model

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_FORMAT = 4


class ConfigError(ValueError):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def _resolve(args, keys: dict) -> dict:
    """Merge config-file values and flags; flags win when given."""
    cfg = _load_config(getattr(args, "config", None))
    resolved = {}
    for key, default in keys.items():
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            resolved[key] = flag_val
        elif key in cfg:
            resolved[key] = cfg[key]
        else:
            resolved[key] = default
    return resolved


def _write_manifest(outdir: Path, command: str, resolved: dict, outputs: list,
                    name: str = "manifest.json") -> None:
    # The destination directory is wherever this manifest lives; echoing its
    # path would break byte-identity between runs into different directories.
    resolved = {k: v for k, v in resolved.items() if k != "out"}
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {"command": command, "package_version": __version__,
                "config": resolved, "outputs": sorted(outputs)}
    (outdir / name).write_text(json.dumps(manifest, indent=1, sort_keys=True))


def _threads_context(threads: int):
    if threads == 0:
        return contextlib.nullcontext()
    try:
        import threadpoolctl
        return threadpoolctl.threadpool_limits(limits=threads)
    except ImportError:  # pragma: no cover
        return contextlib.nullcontext()


def _dtype(precision: str):
    if precision not in ("f32", "f64"):
        raise ConfigError(f"precision must be f32 or f64, got {precision}")
    return np.float32 if precision == "f32" else np.float64


def _mask_for(args_mask, variant: str) -> MaskSpec | None:
    if variant != "attention_cnn":
        return None
    if args_mask in (None, "default"):
        return default_occipital_mask()
    return mask_read(args_mask)


def _model_spec(resolved: dict, variant: str | None = None) -> ModelSpec:
    variant = variant or resolved["model"]
    return ModelSpec(variant=variant,
                     n_classes=resolved["classes"],
                     mask=_mask_for(resolved.get("mask"), variant),
                     learning_rate=resolved["lr"],
                     epochs=resolved["epochs"],
                     batch_size=resolved["batch_size"],
                     seed=resolved["seed"])


def _load_datasets(paths) -> list:
    return [dataset_read(p) for p in paths]


# ---- subcommands ------------------------------------------------------------

def cmd_synth(args) -> int:
    resolved = _resolve(args, {
        "trials_per_exemplar": 3, "snr": 10.0, "seed": 0, "subject_id": "synth",
        "out": None, "amplitude_jitter": None, "latency_jitter": None,
        "signature_boost": None, "off_focus_snr": None, "templates": None,
    })
    if not resolved["out"]:
        raise ConfigError("synth needs --out")
    cfg_fields = {k: v for k, v in resolved.items()
                  if k not in ("out",) and v is not None}
    if resolved["templates"] is not None:
        cfg = SynthConfig.from_dict(cfg_fields)
    else:
        cfg_fields.pop("templates", None)
        cfg = default_synth_config(**cfg_fields)
    ds = synth_generate(cfg)
    out = Path(resolved["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset_write(ds, out)
    _write_manifest(out.parent, "synth",
                    {"generator": cfg.to_dict(), "out": out.name},
                    [out.name], name=f"{out.stem}.manifest.json")
    print(f"wrote {ds.n_trials} trials ({ds.n_channels}x{ds.n_samples}) to {out}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    resolved = _resolve(args, {
        "input": None, "out": None, "ripple_db": 1.0, "zero_phase": False,
        "hp_cutoff_hz": 1.0, "lp_cutoff_hz": 25.0, "decim_factor": 16,
        "window_samples": 32,
    })
    if not resolved["input"] or not resolved["out"]:
        raise ConfigError("preprocess needs --input and --out")
    rec = dsp.read_recording(resolved["input"])
    ds, info = dsp.preprocess_chain(
        rec, hp_cutoff_hz=resolved["hp_cutoff_hz"], lp_cutoff_hz=resolved["lp_cutoff_hz"],
        ripple_db=resolved["ripple_db"], decim_factor=resolved["decim_factor"],
        window_samples=resolved["window_samples"], zero_phase=bool(resolved["zero_phase"]))
    out = Path(resolved["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset_write(ds, out)
    _write_manifest(out.parent, "preprocess",
                    {**{k: v for k, v in resolved.items() if k != "out"},
                     "out": out.name, "filters": info},
                    [out.name], name=f"{out.stem}.manifest.json")
    print(f"preprocessed {rec.n_channels} channels @ {rec.sampling_rate_hz} Hz -> "
          f"{ds.n_trials} trials ({ds.n_channels}x{ds.n_samples} @ {ds.sampling_rate_hz} Hz), "
          f"{info['dropped_trials']} dropped")
    return EXIT_OK


def cmd_train(args) -> int:
    resolved = _resolve(args, {
        "data": None, "out": None, "model": "attention_cnn", "classes": 6,
        "mask": None, "lr": 0.005, "epochs": 25, "batch_size": 64, "seed": 0,
        "precision": "f32", "threads": 0,
    })
    if not resolved["data"] or not resolved["out"]:
        raise ConfigError("train needs --data and --out")
    ds = dataset_read(resolved["data"][0] if isinstance(resolved["data"], list) else resolved["data"])
    ds.validate(model_ready=True)
    spec = _model_spec(resolved)
    outdir = Path(resolved["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    with _threads_context(int(resolved["threads"])):
        rng = np.random.default_rng(spec.seed)
        mp = build(spec, rng, dtype=_dtype(resolved["precision"]))
        history = train_model(mp, ds.trials, ds.labels_for(spec.n_classes), rng)
    save_model(mp, outdir / "model.edkp", epoch=spec.epochs)
    (outdir / "training_log.json").write_text(json.dumps(
        {"loss_per_epoch": history, "spec": spec.to_dict()}, indent=1, sort_keys=True))
    _write_manifest(outdir, "train", {**resolved, "model_spec": spec.to_dict()},
                    ["model.edkp", "training_log.json"])
    final = history[-1] if history else float("nan")
    print(f"trained {spec.variant} for {spec.epochs} epochs, final loss {final:.4f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    resolved = _resolve(args, {
        "data": None, "out": None, "model": "attention_cnn", "classes": 6,
        "mask": None, "lr": 0.005, "epochs": 25, "batch_size": 64, "seed": 0,
        "folds": 10, "fold_seed": 0, "precision": "f32", "threads": 0,
    })
    if not resolved["data"] or not resolved["out"]:
        raise ConfigError("evaluate needs --data and --out")
    path = resolved["data"][0] if isinstance(resolved["data"], list) else resolved["data"]
    ds = dataset_read(path)
    spec = _model_spec(resolved)
    outdir = Path(resolved["out"])
    with _threads_context(int(resolved["threads"])):
        plan = make_folds(ds, int(resolved["folds"]), int(resolved["fold_seed"]))
        report = run_cv(ds, spec, plan, dtype=_dtype(resolved["precision"]))
    outputs = write_eval_outputs(report, outdir, "eval")
    _write_manifest(outdir, "evaluate", {**resolved, "model_spec": spec.to_dict(),
                                         "fold_plan": plan.to_dict()}, outputs)
    chance = 100.0 / spec.n_classes
    print(f"{spec.n_classes}-class accuracy: {100 * report.accuracy_mean:.2f} +/- "
          f"{100 * report.accuracy_std:.2f} % over {plan.k} folds (chance {chance:.2f}%)")
    return EXIT_OK


def cmd_compare(args) -> int:
    resolved = _resolve(args, {
        "data": None, "out": None, "methods": "lda,plain_cnn,attention_cnn",
        "classes": 6, "mask": None, "lr": 0.005, "epochs": 25, "batch_size": 64,
        "seed": 0, "folds": 10, "fold_seed": 0, "precision": "f32", "threads": 0,
    })
    if not resolved["data"] or not resolved["out"]:
        raise ConfigError("compare needs --data (repeatable) and --out")
    paths = resolved["data"] if isinstance(resolved["data"], list) else [resolved["data"]]
    datasets = _load_datasets(paths)
    methods = resolved["methods"].split(",") if isinstance(resolved["methods"], str) \
        else list(resolved["methods"])
    specs = [_model_spec(resolved, variant=m.strip()) for m in methods]
    outdir = Path(resolved["out"])
    with _threads_context(int(resolved["threads"])):
        report = compare_methods(datasets, specs, fold_seed=int(resolved["fold_seed"]),
                                 k=int(resolved["folds"]), dtype=_dtype(resolved["precision"]))
    outputs = write_comparison_outputs(report, outdir, "compare")
    _write_manifest(outdir, "compare", {**resolved,
                                        "specs": [s.to_dict() for s in specs]}, outputs)
    sys.stdout.write(comparison_text(report))
    return EXIT_OK


def cmd_transfer(args) -> int:
    resolved = _resolve(args, {
        "data": None, "out": None, "mask": None, "lr": 0.005, "epochs": 25,
        "batch_size": 64, "seed": 0, "folds": 10, "fold_seed": 0,
        "fine_tune_epochs": None, "threads": 0,
    })
    if not resolved["data"] or not resolved["out"]:
        raise ConfigError("transfer needs --data and --out")
    path = resolved["data"][0] if isinstance(resolved["data"], list) else resolved["data"]
    ds = dataset_read(path)
    base = _model_spec({**resolved, "classes": 6}, variant="attention_cnn")
    outdir = Path(resolved["out"])
    with _threads_context(int(resolved["threads"])):
        plan = make_folds(ds, int(resolved["folds"]), int(resolved["fold_seed"]))
        fte = resolved["fine_tune_epochs"]
        report = transfer_experiment(ds, base, plan,
                                     fine_tune_epochs=int(fte) if fte else None)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "transfer.json").write_text(to_json(report))
    (outdir / "transfer.csv").write_text(transfer_csv(report))
    _write_manifest(outdir, "transfer", {**resolved, "base_spec": base.to_dict()},
                    ["transfer.json", "transfer.csv"])
    print(f"72-class transfer: {100 * report.transfer_mean:.2f} +/- {100 * report.transfer_std:.2f} % | "
          f"from scratch: {100 * report.scratch_mean:.2f} +/- {100 * report.scratch_std:.2f} % | "
          f"difference {100 * report.transfer_minus_scratch:+.2f} points")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    resolved = _resolve(args, {"tolerance": None, "instances": 10, "out": None})
    tol = resolved["tolerance"]
    results = run_battery(instances=int(resolved["instances"]),
                          tolerance_override=float(tol) if tol else None)
    for r in results:
        print(r)
    if resolved["out"]:
        outdir = Path(resolved["out"])
        outdir.mkdir(parents=True, exist_ok=True)
        payload = [{"op": r.name, "max_rel_err": r.max_rel_err,
                    "tolerance": r.tolerance, "passed": r.passed} for r in results]
        (outdir / "gradcheck.json").write_text(json.dumps(payload, indent=1, sort_keys=True))
        _write_manifest(outdir, "gradcheck", resolved, ["gradcheck.json"])
    if all(r.passed for r in results):
        print(f"gradient battery: {len(results)} ops pass")
        return EXIT_OK
    print("gradient battery: FAILURES above")
    return EXIT_CHECK_FAILED


def cmd_inspect(args) -> int:
    resolved = _resolve(args, {"data": None})
    if not resolved["data"]:
        raise ConfigError("inspect needs --data")
    path = resolved["data"][0] if isinstance(resolved["data"], list) else resolved["data"]
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == datamodel.MAGIC:
        ds = dataset_read(path)
        hist = np.bincount(ds.exemplar_labels, minlength=datamodel.N_EXEMPLARS)
        print(f"dataset: subject={ds.subject_id} trials={ds.n_trials} "
              f"channels={ds.n_channels} samples={ds.n_samples} rate={ds.sampling_rate_hz} Hz")
        print(f"exemplar histogram: min={hist.min()} max={hist.max()}")
        print(f"value range: [{ds.trials.min():.4g}, {ds.trials.max():.4g}]")
    elif magic == dsp.RAW_MAGIC:
        rec = dsp.read_recording(path)
        print(f"raw recording: subject={rec.subject_id} channels={rec.n_channels} "
              f"samples={rec.n_samples} rate={rec.sampling_rate_hz} Hz markers={len(rec.markers)}")
    elif magic == checkpoint.MAGIC:
        header, arrays = checkpoint.load_checkpoint(path)
        total = sum(a.size for a in arrays.values())
        print(f"checkpoint: {header['spec'].get('variant')} seed={header['seed']} "
              f"epoch={header['epoch']} arrays={len(arrays)} values={total}")
    else:
        raise ContainerError(f"unrecognized magic {magic!r}")
    return EXIT_OK


# ---- argument wiring ---------------------------------------------------------

def _add_common(p, *, data=False, multi_data=False, out=False, model=False):
    p.add_argument("--config", help="JSON config file; flags override its values")
    if multi_data:
        p.add_argument("--data", action="append", help="dataset file (repeatable)")
    elif data:
        p.add_argument("--data", help="dataset file")
    if out:
        p.add_argument("--out", help="output directory or file")
    if model:
        p.add_argument("--classes", type=int, choices=(6, 72))
        p.add_argument("--mask", help="mask JSON path or 'default'")
        p.add_argument("--lr", type=float)
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--folds", type=int)
        p.add_argument("--fold-seed", dest="fold_seed", type=int)
        p.add_argument("--precision", choices=("f32", "f64"))
        p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eegdecode",
        description="EEG visual-object decoding: synthesis, preprocessing, training, evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic evoked dataset")
    _add_common(p, out=True)
    p.add_argument("--trials-per-exemplar", dest="trials_per_exemplar", type=int)
    p.add_argument("--snr", type=float)
    p.add_argument("--subject-id", dest="subject_id")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="raw recording -> filtered, decimated epochs")
    _add_common(p, out=True)
    p.add_argument("--input", help="raw continuous-recording file")
    p.add_argument("--ripple-db", dest="ripple_db", type=float)
    p.add_argument("--zero-phase", dest="zero_phase", action="store_const", const=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train one model on a full dataset")
    _add_common(p, data=True, out=True, model=True)
    p.add_argument("--model", choices=("attention_cnn", "plain_cnn", "shallow_convnet",
                                       "lstm", "lstm_cnn"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="k-fold cross-validated metrics for one model")
    _add_common(p, data=True, out=True, model=True)
    p.add_argument("--model", choices=("attention_cnn", "plain_cnn", "shallow_convnet",
                                       "lstm", "lstm_cnn", "lda"))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="evaluate several methods on shared folds")
    _add_common(p, multi_data=True, out=True, model=True)
    p.add_argument("--methods", help="comma-separated variant list")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("transfer", help="category-to-exemplar transfer experiment")
    _add_common(p, data=True, out=True, model=True)
    p.add_argument("--fine-tune-epochs", dest="fine_tune_epochs", type=int)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("gradcheck", help="finite-difference gradient battery")
    _add_common(p, out=True)
    p.add_argument("--tolerance", type=float, help="override per-op tolerances")
    p.add_argument("--instances", type=int)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("inspect", help="describe a dataset, recording, or checkpoint")
    _add_common(p, data=True)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContainerError, checkpoint.CheckpointError) as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (TrainingDivergedError, FoldFailure) as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
