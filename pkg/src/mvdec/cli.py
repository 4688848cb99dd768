"""Command-line entry point.

Subcommands: ``generate`` (synthetic datasets), ``train`` (full pipeline,
writes report plus artifacts), ``eval`` (score a label file against a
truth file), and ``export-embeddings`` (encode a dataset with saved
models).  ``train`` reads an optional JSON config file whose keys mirror
the TrainingConfig fields; command-line flags override file values.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio, metrics, trainer

logger = logging.getLogger("mvdec.cli")

_CONFIG_EXTRA_KEYS = {"dataset", "out", "verbose"}
_UNSET = object()  # distinguishes "flag not given" from an explicit none


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}") from exc


def _parse_float_tuple(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}") from exc


def _parse_optional_int(text: str):
    if text.lower() in ("none", "auto"):
        return None
    try:
        return int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an int or 'none', got {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvdec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic multi-view dataset")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--preset", choices=sorted(dataio.PRESETS), help="named preset")
    gen.add_argument("--n", type=int, help="number of examples")
    gen.add_argument("--k", type=int, help="number of clusters")
    gen.add_argument("--dims", type=_parse_int_tuple, help="per-view dims, e.g. 20,20,20")
    gen.add_argument("--noise", type=_parse_float_tuple, help="per-view noise levels")
    gen.add_argument("--separation", type=float, help="prototype spread (default 1.0)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--name", default=None, help="dataset name in the manifest")
    gen.add_argument("--format", choices=("binary", "csv"), default="binary")

    tr = sub.add_parser("train", help="train on a dataset directory")
    tr.add_argument("--dataset", required=True, help="dataset directory")
    tr.add_argument("--out", required=True, help="output directory")
    tr.add_argument("--config", help="JSON config file (flags override it)")
    tr.add_argument("--verbose", action="store_true", help="log round summaries")
    tr.add_argument("--mode", choices=trainer.MODES)
    tr.add_argument("--k", type=int)
    tr.add_argument("--gamma", type=float)
    tr.add_argument("--batch-size", type=int)
    tr.add_argument("--pretrain-epochs", type=int)
    tr.add_argument("--finetune-batches-per-round", type=_parse_optional_int, default=_UNSET)
    tr.add_argument("--aligned-stop", type=float)
    tr.add_argument("--max-rounds", type=int)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--embed-dim", type=int)
    tr.add_argument("--hidden-dims", type=_parse_int_tuple)
    tr.add_argument("--learning-rate", type=float)
    tr.add_argument("--kmeans-restarts", type=int)

    ev = sub.add_parser("eval", help="score predicted labels against truth")
    ev.add_argument("pred", help="CSV of predicted labels, one per line")
    ev.add_argument("truth", help="CSV of ground-truth labels")

    ex = sub.add_parser("export-embeddings", help="encode a dataset with saved models")
    ex.add_argument("--models", required=True, help="directory of view*.npz models")
    ex.add_argument("--dataset", required=True, help="dataset directory")
    ex.add_argument("--out", required=True, help="output directory")
    return parser


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_generate(args, parser) -> int:
    explicit = {
        "--n": args.n, "--k": args.k, "--dims": args.dims,
        "--noise": args.noise, "--separation": args.separation,
    }
    given = [flag for flag, value in explicit.items() if value is not None]
    if args.preset and given:
        parser.error(f"--preset conflicts with {', '.join(given)}")
    if args.preset:
        spec = dataio.preset_spec(args.preset, seed=args.seed)
        if args.name:
            spec = dataclasses.replace(spec, name=args.name)
    else:
        missing = [f for f in ("--n", "--k", "--dims", "--noise") if explicit[f] is None]
        if missing:
            parser.error(f"need {', '.join(missing)} (or --preset)")
        spec = dataio.SyntheticSpec(
            n=args.n,
            k=args.k,
            dims=args.dims,
            noise_per_view=args.noise,
            separation=1.0 if args.separation is None else args.separation,
            seed=args.seed,
            name=args.name or "synthetic",
        )
    dataset = dataio.generate_synthetic(spec)
    out = dataio.save_dataset(dataset, args.out, fmt=args.format)
    print(
        f"wrote {dataset.name}: n={dataset.n} views={dataset.v} "
        f"dims={list(dataset.dims)} k={spec.k} -> {out}"
    )
    return 0


def _load_config_file(path: str) -> dict:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    allowed = {f.name for f in dataclasses.fields(trainer.TrainingConfig)}
    unknown = sorted(set(data) - allowed - _CONFIG_EXTRA_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {unknown}")
    return data


def _cmd_train(args) -> int:
    file_values: dict = {}
    if args.config:
        file_values = _load_config_file(args.config)
    overrides = {
        "mode": args.mode,
        "k": args.k,
        "gamma": args.gamma,
        "batch_size": args.batch_size,
        "pretrain_epochs": args.pretrain_epochs,
        "aligned_stop": args.aligned_stop,
        "max_rounds": args.max_rounds,
        "seed": args.seed,
        "embed_dim": args.embed_dim,
        "hidden_dims": args.hidden_dims,
        "learning_rate": args.learning_rate,
        "kmeans_restarts": args.kmeans_restarts,
    }
    kwargs = {k: v for k, v in file_values.items() if k not in _CONFIG_EXTRA_KEYS}
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    if args.finetune_batches_per_round is not _UNSET:
        kwargs["finetune_batches_per_round"] = args.finetune_batches_per_round
    if "k" not in kwargs:
        raise ValueError("k is required (set --k or put it in the config file)")
    config = trainer.TrainingConfig(**kwargs)

    if args.verbose or file_values.get("verbose"):
        logging.basicConfig(level=logging.INFO, format="%(name)s %(message)s")

    dataset = dataio.load_dataset(file_values.get("dataset", args.dataset))
    out = Path(file_values.get("out", args.out))
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = trainer.run_training(dataset, config)
    except trainer.TrainingError as exc:
        if exc.report is not None:
            dataio.write_report(exc.report, out / "report.json")
        print(f"training failed: {exc}", file=sys.stderr)
        return 1

    dataio.write_report(result.report, out / "report.json")
    for v, labels in enumerate(result.per_view_labels):
        dataio.write_labels(out / f"labels_view{v}.csv", labels)
    if result.consensus_labels is not None:
        dataio.write_labels(out / "labels.csv", result.consensus_labels)
    dataio.save_models(result.models, out / "models")
    dataio.export_embeddings(result.models, dataset, out)
    final = result.report["final"]
    summary = f"stop={result.report['stop_reason']} rounds={final['rounds_run']} aligned={final['aligned_rate']:.3f}"
    if final["consensus"]:
        summary += f" acc={final['consensus']['acc']:.4f}"
    print(summary)
    return 0


def _cmd_eval(args) -> int:
    pred = dataio.read_labels(args.pred)
    truth = dataio.read_labels(args.truth)
    scores = {
        "acc": metrics.acc(pred, truth),
        "nmi": metrics.nmi(pred, truth),
        "ari": metrics.ari(pred, truth),
    }
    print(json.dumps(scores))
    return 0


def _cmd_export(args) -> int:
    models = dataio.load_models(args.models)
    dataset = dataio.load_dataset(args.dataset)
    written = dataio.export_embeddings(models, dataset, args.out)
    print(f"wrote {len(written)} files to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return _cmd_generate(args, parser)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "eval":
            return _cmd_eval(args)
        return _cmd_export(args)
    except (dataio.DatasetError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
