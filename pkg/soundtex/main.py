"""Command-line entry point: ``python -m soundtex <command> [options]``."""
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence
import argparse
import logging
import sys

import numpy as np
import pandas as pd

from .config import FEATURE_KINDS, PRUNE_SCOPES, RESCALE_MODES, PipelineConfig, load_config
from .dsp_core import cochleagram, make_cochlear_filterbank, resample
from .exceptions import InvalidInputError, OutOfRangeError, SoundTexError, UsageError
from .extractors import create_extractor
from .labeling import (
    assign,
    binary_encode,
    cluster_count_sweep,
    code_to_string,
    kmeans_fit,
    nearest_to_centroid,
    pca_fit,
    prune_outliers,
)
from .manifest import read_manifest, write_manifest
from .probe import baselines, evaluate, format_report, train
from .store import (
    load_model,
    read_store,
    read_store_header,
    read_table,
    save_model,
    write_store,
    write_table,
)
from .synth import make_corpus
from .texture_stats import TextureLayout
from .viz import RenderSpec, render_centroid_stats, render_cochleagram, render_texture_stats
from .wav import decode_wav

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on bad usage."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("list is empty")
    return values


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"fraction must be in [0, 1), got {value}")
    return value


def build_parser() -> CliParser:
    parser = CliParser(prog="soundtex", description="Ambient sound texture labeling pipeline")
    parser.add_argument("--config", help="key=value file overriding pipeline defaults")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    seeded = CliParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=0)

    sub = parser.add_subparsers(dest="command", parser_class=CliParser)
    sub.required = True

    p = sub.add_parser("extract", parents=[seeded], help="manifest -> feature store")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--windows", type=int)
    p.add_argument("--feature", choices=FEATURE_KINDS, default="texture")
    p.add_argument("--rescale", choices=RESCALE_MODES)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--manifest-out", help="write the manifest with the sampled window centers")

    p = sub.add_parser("cluster", parents=[seeded], help="k-means labels with outlier pruning")
    p.add_argument("--store", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--prune", choices=PRUNE_SCOPES)
    p.add_argument("--rescale", choices=RESCALE_MODES, help="group rescaling the store was extracted with")
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-labels", required=True)
    p.add_argument("--exemplars", help="CSV of the windows nearest each centroid")
    p.add_argument("--n-exemplars", type=int, default=5)

    p = sub.add_parser("pca-fit", help="fit the principal components used by encode")
    p.add_argument("--store", required=True)
    p.add_argument("--components", type=int)
    p.add_argument("--out-model", required=True)

    p = sub.add_parser("encode", help="binary codes from a PCA model")
    p.add_argument("--store", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", parents=[seeded], help="k-means over several cluster counts")
    p.add_argument("--store", required=True)
    p.add_argument("--ks", type=_int_list, required=True)
    p.add_argument("--prune", choices=PRUNE_SCOPES)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--out")

    p = sub.add_parser("probe", parents=[seeded], help="train a linear probe on labels")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--label-column", default="cluster")
    p.add_argument("--test-fraction", type=_fraction, default=0.0)
    p.add_argument("--exclude-pruned", action="store_true")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--l2", type=float)
    p.add_argument("--out", help="write the report here as well")
    p.add_argument("--out-model")

    p = sub.add_parser("viz", help="render a figure")
    p.add_argument("--kind", choices=["cochleagram", "centroid", "texture"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--wav")
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--duration", type=float)
    p.add_argument("--model")
    p.add_argument("--cluster", type=int, default=0)
    p.add_argument("--store")
    p.add_argument("--row", type=int, default=0)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--colormap", choices=["grayscale", "diverging"], default="grayscale")
    p.add_argument("--rescale", choices=RESCALE_MODES,
                   help="group rescaling of the vectors (default: recorded in the model, else config)")

    p = sub.add_parser("stats", help="print a feature store header")
    p.add_argument("--store", required=True)

    p = sub.add_parser("synth", parents=[seeded], help="write a synthetic corpus and manifest")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--clips", type=int, default=20)
    p.add_argument("--duration", type=float, default=6.0)
    p.add_argument("--short", type=int, default=0, help="extra clips shorter than one window")
    p.add_argument("--sample-rate", type=int, default=20000)

    return parser


def _emit(lines: Sequence[str]) -> None:
    for line in lines:
        print(line)


def _layout(config: PipelineConfig) -> TextureLayout:
    return TextureLayout(
        n_channels=config.n_channels,
        offsets=tuple(config.corr_offsets),
        n_mod=config.n_mod_filters,
        rescale=config.rescale,
    )


def cmd_extract(args, config: PipelineConfig) -> int:
    config = config.with_overrides(rescale=args.rescale)
    manifest = read_manifest(args.manifest, window_s=config.window_s)
    extractor = create_extractor(args.feature, config)
    result = extractor.extract(manifest, n_windows=args.windows, seed=args.seed, workers=args.workers)
    write_store(args.out, result.matrix, result.ids)
    if args.manifest_out:
        write_manifest(args.manifest_out, result.manifest)
    _emit([
        f"clips: {len(manifest)}",
        f"rows: {result.row_count}",
        f"dim: {extractor.dim}",
        f"warnings: {len(result.warnings)}",
    ])
    return 0


def _ids_frame(store) -> pd.DataFrame:
    return pd.DataFrame({
        "clip_id": [clip_id for clip_id, _ in store.ids],
        "window": [window for _, window in store.ids],
    })


def cmd_cluster(args, config: PipelineConfig) -> int:
    config = config.with_overrides(k=args.k, prune=args.prune, rescale=args.rescale)
    store = read_store(args.store)
    X = store.matrix.astype(np.float64)
    model = kmeans_fit(X, config.k, seed=args.seed, max_iter=config.kmeans_max_iter, tol=config.kmeans_tol)
    model = replace(model, feature_rescale=config.rescale)
    labels, distances = assign(model, X)
    pruned = prune_outliers(labels, distances, config.prune)
    save_model(args.out_model, model)

    table = _ids_frame(store)
    table["cluster"] = labels
    table["distance"] = distances
    table["pruned"] = pruned
    write_table(args.out_labels, table)

    if args.exemplars:
        rows = []
        for cluster in range(model.k):
            picked = nearest_to_centroid(model, X, store.clip_ids, cluster, n=args.n_exemplars)
            for rank, idx in enumerate(picked):
                rows.append({
                    "cluster": cluster,
                    "rank": rank,
                    "clip_id": store.ids[idx][0],
                    "window": store.ids[idx][1],
                    "distance": float(np.linalg.norm(X[idx] - model.centroids[cluster])),
                })
        write_table(args.exemplars, pd.DataFrame(rows, columns=["cluster", "rank", "clip_id", "window", "distance"]))

    _emit([
        f"k: {model.k}",
        f"inertia: {model.inertia:.6g}",
        f"iterations: {model.iterations_run}",
        f"retained: {int((~pruned).sum())}/{len(labels)}",
    ])
    return 0


def cmd_pca_fit(args, config: PipelineConfig) -> int:
    config = config.with_overrides(n_components=args.components)
    store = read_store(args.store)
    model = pca_fit(store.matrix.astype(np.float64), config.n_components)
    save_model(args.out_model, model)
    _emit([
        f"components: {model.n_components}",
        f"dim: {model.dim}",
        f"top variance: {model.explained_variance[0]:.6g}",
    ])
    return 0


def cmd_encode(args, config: PipelineConfig) -> int:
    store = read_store(args.store)
    model = load_model(args.model, expected_kind="pca")
    codes = binary_encode(store.matrix.astype(np.float64), model)
    table = _ids_frame(store)
    table["code"] = [code_to_string(code) for code in codes]
    write_table(args.out, table)
    _emit([
        f"rows: {len(table)}",
        f"bits: {model.n_components}",
        f"distinct codes: {table['code'].nunique()}",
    ])
    return 0


def cmd_sweep(args, config: PipelineConfig) -> int:
    config = config.with_overrides(prune=args.prune)
    store = read_store(args.store)
    results = cluster_count_sweep(
        store.matrix.astype(np.float64),
        args.ks,
        seed=args.seed,
        scope=config.prune,
        n_restarts=args.restarts,
        max_iter=config.kmeans_max_iter,
        tol=config.kmeans_tol,
    )
    table = pd.DataFrame([
        {
            "k": r.k,
            "inertia": r.model.inertia,
            "iterations": r.model.iterations_run,
            "retained": r.retained_count,
            "smallest_cluster": int(r.cluster_sizes.min()),
            "largest_cluster": int(r.cluster_sizes.max()),
        }
        for r in results
    ])
    if args.out:
        write_table(args.out, table)
    _emit([f"k={r.k} inertia={r.model.inertia:.6g} retained={r.retained_count}" for r in results])
    return 0


def _split_clips(clip_ids: Sequence[str], fraction: float, seed: int) -> np.ndarray:
    """Boolean test mask holding out whole clips."""
    unique = sorted(set(clip_ids))
    if fraction <= 0 or len(unique) < 2:
        return np.zeros(len(clip_ids), dtype=bool)
    n_test = min(max(int(round(fraction * len(unique))), 1), len(unique) - 1)
    rng = np.random.default_rng(seed)
    held_out = {unique[i] for i in rng.permutation(len(unique))[:n_test]}
    return np.array([c in held_out for c in clip_ids], dtype=bool)


def cmd_probe(args, config: PipelineConfig) -> int:
    config = config.with_overrides(probe_epochs=args.epochs, probe_lr=args.lr, probe_l2=args.l2)
    store = read_store(args.features)
    labels = read_table(args.labels)
    if args.label_column not in labels.columns:
        raise InvalidInputError(f"label table has no column {args.label_column!r}")

    features = _ids_frame(store)
    features["row"] = np.arange(store.row_count)
    merged = features.merge(labels, on=["clip_id", "window"], how="inner", validate="one_to_one")
    if merged.empty:
        raise InvalidInputError("no feature rows match the label table")
    if len(merged) < store.row_count:
        logger.warning(f"{store.row_count - len(merged)} feature rows have no label and are ignored")
    merged = merged.sort_values("row", kind="stable")

    X = store.matrix[merged["row"].to_numpy()].astype(np.float64)
    column = merged[args.label_column]
    if not pd.api.types.is_integer_dtype(column):
        raise InvalidInputError(
            f"label column {args.label_column!r} must hold integer class ids, found dtype {column.dtype}"
        )
    y = column.to_numpy().astype(np.int64)
    n_classes = int(y.max()) + 1
    test = _split_clips(merged["clip_id"].tolist(), args.test_fraction, args.seed)
    training = ~test
    if args.exclude_pruned and "pruned" in merged.columns:
        training &= ~merged["pruned"].astype(bool).to_numpy()
    if not training.any():
        raise InvalidInputError("no training rows left after the split and pruning")

    model = train(X[training], y[training], epochs=config.probe_epochs, lr=config.probe_lr,
                  l2=config.probe_l2, n_classes=n_classes)
    train_report = evaluate(model, X[training], y[training])
    eval_mask = test if test.any() else training
    report = evaluate(model, X[eval_mask], y[eval_mask])
    chance, majority = baselines(y)

    lines = format_report(
        int(eval_mask.sum()), n_classes, report["accuracy"], chance, majority,
        train_accuracy=train_report["accuracy"],
    )
    _emit(lines)
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.out_model:
        save_model(args.out_model, model)
    return 0


def cmd_viz(args, config: PipelineConfig) -> int:
    if args.kind == "cochleagram":
        if not args.wav:
            raise UsageError("viz --kind cochleagram needs --wav")
        waveform = decode_wav(args.wav)
        if waveform.sample_rate != config.sample_rate:
            waveform = resample(waveform, config.sample_rate)
        start = int(round(args.start * waveform.sample_rate))
        length = len(waveform) - start if args.duration is None else int(round(args.duration * waveform.sample_rate))
        if start < 0 or length < 1 or start + length > len(waveform):
            raise OutOfRangeError(f"segment [{args.start}, +{args.duration}] s is outside the clip")
        bank = make_cochlear_filterbank(config.n_channels, config.low_hz, config.high_hz,
                                        sample_rate=config.sample_rate)
        c = cochleagram(waveform.segment(start, length), bank, env_rate=config.env_rate,
                        exponent=config.compression)
        data = render_cochleagram(c, RenderSpec(width=args.width, height=args.height, colormap=args.colormap))
    elif args.kind == "centroid":
        if not args.model:
            raise UsageError("viz --kind centroid needs --model")
        model = load_model(args.model, expected_kind="cluster")
        rescale = args.rescale or model.feature_rescale
        data = render_centroid_stats(model, args.cluster, _layout(config.with_overrides(rescale=rescale)))
    else:
        if not args.store:
            raise UsageError("viz --kind texture needs --store")
        store = read_store(args.store)
        if not 0 <= args.row < store.row_count:
            raise OutOfRangeError(f"row {args.row} out of range for {store.row_count} rows")
        clip_id, window = store.ids[args.row]
        layout = _layout(config.with_overrides(rescale=args.rescale))
        data = render_texture_stats(store.matrix[args.row].astype(np.float64), layout,
                                    title=f"{clip_id} window {window}")
    Path(args.out).write_bytes(data)
    _emit([f"wrote: {args.out} ({len(data)} bytes)"])
    return 0


def cmd_stats(args, config: PipelineConfig) -> int:
    header = read_store_header(args.store)
    _emit([
        f"version: {header.version}",
        f"row_count: {header.row_count}",
        f"dim: {header.dim}",
        f"trailer_bytes: {header.trailer_bytes}",
    ])
    return 0


def cmd_synth(args, config: PipelineConfig) -> int:
    manifest = make_corpus(args.out_dir, n_clips=args.clips, duration_s=args.duration, seed=args.seed,
                           sample_rate=args.sample_rate, n_short=args.short)
    _emit([f"clips: {len(manifest)}", f"manifest: {Path(args.out_dir) / 'manifest.jsonl'}"])
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "cluster": cmd_cluster,
    "pca-fit": cmd_pca_fit,
    "encode": cmd_encode,
    "sweep": cmd_sweep,
    "probe": cmd_probe,
    "viz": cmd_viz,
    "stats": cmd_stats,
    "synth": cmd_synth,
}


def setup_logging(level: str) -> None:
    """Send log records to stderr at ``level``."""
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(str(e), file=sys.stderr)
        return 1
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    try:
        config = load_config(args.config)
        setup_logging(args.log_level or config.log_level)
        return COMMANDS[args.command](args, config)
    except UsageError as e:
        logger.error(str(e))
        return 1
    except (SoundTexError, OSError, pd.errors.MergeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
