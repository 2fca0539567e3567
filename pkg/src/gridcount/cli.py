"""Command-line interface: train, embed, loo, synth, info.

Every run is deterministic given its flags and seed. Exit codes: 0 on
success, 2 for usage errors, 3 for malformed data, 4 for numeric failure
during training.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .embedding import CONTINUOUS, DISCRETE, cell_occupancy, embed, loo_evaluate
from .errors import DataFormatError, NumericFailure
from .io import (
    ModelFile,
    read_corpus,
    read_model,
    read_targets,
    read_vocab,
    write_corpus,
    write_model,
    write_targets,
)
from .synth import SynthSpec, block_labeler, generate
from .trainer import TrainConfig, fit, infer_posteriors
from .validation import check_geometry

__all__ = ["main"]


def _add_geometry_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dims", type=int, default=None, help="grid dimensionality")
    parser.add_argument(
        "--extent", type=int, nargs="+", required=True, help="grid size per dimension"
    )
    parser.add_argument(
        "--window", type=int, nargs="+", required=True, help="window size per dimension"
    )


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--iters", type=int, default=200, help="EM iteration cap")
    parser.add_argument(
        "--tol", type=float, default=1e-6, help="relative bound improvement stop"
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    parser.add_argument(
        "--noise", type=float, default=0.1, help="initialization noise amplitude"
    )
    parser.add_argument(
        "--pseudocount", type=float, default=1e-8, help="additive update smoothing"
    )


def _resolve_geometry(args):
    if args.dims is not None:
        for name, values in (("extent", args.extent), ("window", args.window)):
            if len(values) != args.dims:
                raise ValueError(
                    f"--{name} needs {args.dims} values for --dims {args.dims}, got {len(values)}"
                )
    elif len(args.extent) != len(args.window):
        raise ValueError(
            f"--extent has {len(args.extent)} values but --window has {len(args.window)}"
        )
    return check_geometry(args.extent, args.window)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        max_iters=args.iters,
        rel_tol=args.tol,
        seed=args.seed,
        init_noise=args.noise,
        pseudocount=args.pseudocount,
    )


def _config_record(geometry, vocab_size, config: TrainConfig) -> dict:
    return {
        "dims": geometry.ndim,
        "extent": list(geometry.extents),
        "window": list(geometry.window),
        "capacity": geometry.capacity,
        "vocab_size": vocab_size,
        "max_iters": config.max_iters,
        "rel_tol": config.rel_tol,
        "seed": config.seed,
        "init_noise": config.init_noise,
        "pseudocount": config.pseudocount,
    }


def _write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_train(args) -> int:
    timings = {}
    start = time.perf_counter()
    corpus = read_corpus(args.corpus)
    timings["read"] = time.perf_counter() - start

    geometry = _resolve_geometry(args)
    config = _train_config(args)
    start = time.perf_counter()
    result = fit(corpus.bags, geometry, corpus.vocab_size, config)
    timings["train"] = time.perf_counter() - start
    for it, bound in enumerate(result.bound_trace):
        print(f"iter {it} bound {bound:.10g}")
    print(f"{'converged' if result.converged else 'stopped'} after {result.n_iter} iterations")

    start = time.perf_counter()
    write_model(args.out, ModelFile(grid=result.grid))
    timings["write"] = time.perf_counter() - start

    manifest_path = args.manifest or f"{args.out}.manifest.json"
    _write_manifest(
        manifest_path,
        {
            "command": "train",
            "inputs": {"corpus": str(args.corpus)},
            "outputs": {"model": str(args.out), "manifest": str(manifest_path)},
            "config": _config_record(geometry, corpus.vocab_size, config),
            "phase_seconds": timings,
            "final_bound": result.bound_trace[-1],
            "iterations": result.n_iter,
            "converged": result.converged,
        },
    )
    return 0


def cmd_embed(args) -> int:
    model = read_model(args.model)
    corpus = read_corpus(args.corpus)
    targets = read_targets(args.targets, args.kind, expected_count=len(corpus.bags))
    posteriors = infer_posteriors(model.grid, corpus.bags)
    embedding = embed(posteriors, targets, kind=args.kind, alpha=args.alpha)
    write_model(args.model, ModelFile(grid=model.grid, embedding=embedding))

    occupancies = np.stack([cell_occupancy(p) for p in posteriors])
    if args.kind == DISCRETE:
        flat = embedding.values.reshape(-1, embedding.n_classes)
        predictions = np.argmax(occupancies @ flat, axis=1)
        lines = [str(int(p)) for p in predictions]
    else:
        predictions = occupancies @ embedding.values.reshape(-1)
        lines = [repr(float(p)) for p in predictions]
    Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def cmd_loo(args) -> int:
    timings = {}
    start = time.perf_counter()
    corpus = read_corpus(args.corpus)
    targets = read_targets(args.targets, args.kind, expected_count=len(corpus.bags))
    timings["read"] = time.perf_counter() - start

    manifest: dict = {"command": "loo", "inputs": {"corpus": str(args.corpus), "targets": str(args.targets)}}
    start = time.perf_counter()
    if args.model is not None:
        grid = read_model(args.model).grid
        manifest["inputs"]["model"] = str(args.model)
        posteriors = infer_posteriors(grid, corpus.bags)
    else:
        if args.extent is None or args.window is None:
            raise ValueError("loo needs either --model or --extent/--window")
        geometry = _resolve_geometry(args)
        config = _train_config(args)
        result = fit(corpus.bags, geometry, corpus.vocab_size, config)
        grid = result.grid
        posteriors = result.posteriors
        manifest["config"] = _config_record(geometry, corpus.vocab_size, config)
        manifest["final_bound"] = result.bound_trace[-1]
    timings["fit"] = time.perf_counter() - start

    start = time.perf_counter()
    report = loo_evaluate(grid, posteriors, targets, kind=args.kind, alpha=args.alpha)
    timings["evaluate"] = time.perf_counter() - start
    print(report.to_text(), end="")

    manifest["metrics"] = {
        "metric": report.metric,
        "value": None if not report.defined else report.value,
        "folds": report.n_folds,
        "defined": report.defined,
    }
    manifest["phase_seconds"] = timings
    manifest_path = args.manifest or f"{args.corpus}.loo-manifest.json"
    manifest["outputs"] = {"manifest": str(manifest_path)}
    _write_manifest(manifest_path, manifest)
    return 0


def cmd_synth(args) -> int:
    geometry = _resolve_geometry(args)
    words = args.words[0] if len(args.words) == 1 else (args.words[0], args.words[1])
    if len(args.words) > 2:
        raise ValueError("--words takes one value or a low/high pair")
    labeler = block_labeler(geometry) if args.labels else None
    spec = SynthSpec(
        geometry=geometry,
        vocab_size=args.vocab,
        n_docs=args.docs,
        n_words=words,
        seed=args.seed,
        sharpness=args.sharpness,
        labeler=labeler,
    )
    bags, anchors, grid = generate(spec)

    from .corpus import Corpus

    write_corpus(Corpus(bags=bags, vocab_size=args.vocab), args.out)
    anchors_path = args.anchors_out or f"{args.out}.anchors"
    Path(anchors_path).write_text(
        "\n".join(" ".join(str(c) for c in a) for a in anchors) + "\n"
    )
    outputs = {"corpus": str(args.out), "anchors": str(anchors_path)}
    if args.labels:
        labels_path = args.labels_out or f"{args.out}.labels"
        write_targets([bag.target for bag in bags], labels_path)
        outputs["labels"] = str(labels_path)
    if args.model_out:
        write_model(args.model_out, ModelFile(grid=grid))
        outputs["planted_model"] = str(args.model_out)
    if args.manifest:
        _write_manifest(
            args.manifest,
            {
                "command": "synth",
                "outputs": outputs,
                "config": {
                    "dims": geometry.ndim,
                    "extent": list(geometry.extents),
                    "window": list(geometry.window),
                    "capacity": geometry.capacity,
                    "vocab_size": args.vocab,
                    "docs": args.docs,
                    "words": list(args.words),
                    "seed": args.seed,
                    "sharpness": args.sharpness,
                    "labels": bool(args.labels),
                },
            },
        )
    print(f"wrote {len(bags)} documents to {args.out}")
    return 0


def _entropy_field(grid) -> np.ndarray:
    probs = grid.probs.values
    return -(probs * np.log(probs)).sum(axis=-1)


def _write_field_csv(path, geometry, values: np.ndarray, channel_name: str | None) -> None:
    dims = [f"i{d + 1}" for d in range(geometry.ndim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if channel_name is None:
            writer.writerow(dims + ["value"])
            for cell in np.ndindex(*geometry.extents):
                writer.writerow(list(cell) + [repr(float(values[cell]))])
        else:
            writer.writerow(dims + [channel_name, "value"])
            n_channels = values.shape[-1]
            for cell in np.ndindex(*geometry.extents):
                row = values[cell]
                for z in range(n_channels):
                    writer.writerow(list(cell) + [z, repr(float(row[z]))])


def _save_heatmap_images(path_stem: str, suffix: str, geometry, field: np.ndarray, title: str) -> list[str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    def render(data2d: np.ndarray, out: str, label: str):
        fig, ax = plt.subplots(figsize=(4, 4))
        im = ax.imshow(np.atleast_2d(data2d), aspect="auto", interpolation="nearest")
        ax.set_title(label)
        fig.colorbar(im, ax=ax)
        fig.savefig(out, bbox_inches="tight")
        plt.close(fig)

    written = []
    if geometry.ndim == 1:
        out = f"{path_stem}{suffix}"
        render(field[None, :], out, title)
        written.append(out)
    elif geometry.ndim == 2:
        out = f"{path_stem}{suffix}"
        render(field, out, title)
        written.append(out)
    else:
        # render 2D slices along the last grid dimension, one image per index
        for depth in range(geometry.extents[-1]):
            out = f"{path_stem}.slice{depth}{suffix}"
            render(field[..., depth].reshape(geometry.extents[:-1]), out, f"{title} [depth {depth}]")
            written.append(out)
    return written


def cmd_info(args) -> int:
    model = read_model(args.model)
    grid = model.grid
    geometry = grid.geometry
    print(f"dims {geometry.ndim}")
    print("extent " + " ".join(str(e) for e in geometry.extents))
    print("window " + " ".join(str(w) for w in geometry.window))
    print(f"capacity {geometry.capacity:.6g}")
    print(f"vocab {grid.vocab_size}")
    if model.embedding is None:
        print("labels none")
    elif model.embedding.kind == DISCRETE:
        print(f"labels discrete {model.embedding.n_classes}")
    else:
        print("labels continuous")

    if args.top_words > 0:
        vocab = read_vocab(args.vocab) if args.vocab else None
        if vocab is not None and len(vocab) != grid.vocab_size:
            raise DataFormatError(
                f"vocab file has {len(vocab)} words, model expects {grid.vocab_size}"
            )
        flat = grid.probs.flat()
        for idx, cell in enumerate(np.ndindex(*geometry.extents)):
            order = np.argsort(-flat[idx])[: args.top_words]
            shown = ", ".join(
                f"{vocab[z] if vocab else z}:{flat[idx, z]:.4f}" for z in order
            )
            print(f"cell {' '.join(str(c) for c in cell)}: {shown}")

    if args.heatmap:
        target = Path(args.heatmap)
        suffix = target.suffix.lower()
        stem = str(target)[: -len(suffix)] if suffix else str(target)
        written = []
        if suffix == ".csv":
            pi_path = f"{stem}.pi.csv"
            _write_field_csv(pi_path, geometry, grid.probs.values, "word")
            written.append(pi_path)
            if model.embedding is not None:
                emb_path = f"{stem}.labels.csv"
                channel = "class" if model.embedding.kind == DISCRETE else None
                _write_field_csv(emb_path, geometry, model.embedding.values, channel)
                written.append(emb_path)
        elif suffix == ".png":
            written += _save_heatmap_images(
                f"{stem}.pi", ".png", geometry, _entropy_field(grid), "word distribution entropy"
            )
            if model.embedding is not None:
                if model.embedding.kind == DISCRETE:
                    field = np.argmax(model.embedding.values, axis=-1).astype(float)
                    label = "dominant embedded class"
                else:
                    field = model.embedding.values
                    label = "embedded target"
                written += _save_heatmap_images(f"{stem}.labels", ".png", geometry, field, label)
        else:
            raise ValueError(f"--heatmap must end in .csv or .png, got {args.heatmap!r}")
        for path in written:
            print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridcount",
        description="Counting grids: windowed word distributions on a torus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a grid to a docword corpus")
    p_train.add_argument("corpus", help="docword corpus file")
    _add_geometry_flags(p_train)
    _add_train_flags(p_train)
    p_train.add_argument("--out", required=True, help="model file to write")
    p_train.add_argument("--manifest", default=None, help="manifest path (default <out>.manifest.json)")
    p_train.set_defaults(func=cmd_train)

    p_embed = sub.add_parser("embed", help="embed targets into a trained model and predict")
    p_embed.add_argument("model", help="trained model file (rewritten with the embedding)")
    p_embed.add_argument("corpus", help="docword corpus file")
    p_embed.add_argument("targets", help="one target per line")
    p_embed.add_argument("--kind", choices=(DISCRETE, CONTINUOUS), default=DISCRETE)
    p_embed.add_argument("--alpha", type=float, default=1e-6, help="prior smoothing strength")
    p_embed.add_argument("--out", required=True, help="predictions file, one per line")
    p_embed.set_defaults(func=cmd_embed)

    p_loo = sub.add_parser("loo", help="leave-one-out evaluation of the label readout")
    p_loo.add_argument("corpus", help="docword corpus file")
    p_loo.add_argument("targets", help="one target per line")
    p_loo.add_argument("--kind", choices=(DISCRETE, CONTINUOUS), default=DISCRETE)
    p_loo.add_argument("--alpha", type=float, default=1e-6, help="prior smoothing strength")
    p_loo.add_argument("--model", default=None, help="trained model (otherwise train first)")
    p_loo.add_argument("--dims", type=int, default=None)
    p_loo.add_argument("--extent", type=int, nargs="+", default=None)
    p_loo.add_argument("--window", type=int, nargs="+", default=None)
    _add_train_flags(p_loo)
    p_loo.add_argument("--manifest", default=None, help="manifest path")
    p_loo.set_defaults(func=cmd_loo)

    p_synth = sub.add_parser("synth", help="generate a corpus from a planted blocky grid")
    _add_geometry_flags(p_synth)
    p_synth.add_argument("--vocab", type=int, required=True, help="vocabulary size")
    p_synth.add_argument("--docs", type=int, required=True, help="number of documents")
    p_synth.add_argument(
        "--words", type=int, nargs="+", required=True, help="words per document (count or low high)"
    )
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--sharpness", type=float, default=10.0, help="planted topic tightness")
    p_synth.add_argument("--labels", action="store_true", help="label documents by window tile")
    p_synth.add_argument("--out", required=True, help="corpus file to write")
    p_synth.add_argument("--anchors-out", default=None, help="true anchors (default <out>.anchors)")
    p_synth.add_argument("--labels-out", default=None, help="labels (default <out>.labels)")
    p_synth.add_argument("--model-out", default=None, help="write the planted grid too")
    p_synth.add_argument("--manifest", default=None, help="manifest path")
    p_synth.set_defaults(func=cmd_synth)

    p_info = sub.add_parser("info", help="inspect a model file")
    p_info.add_argument("model", help="model file")
    p_info.add_argument("--vocab", default=None, help="vocabulary file, one word per line")
    p_info.add_argument("--top-words", type=int, default=0, help="print top words per cell")
    p_info.add_argument("--heatmap", default=None, help="export heatmaps (.csv or .png)")
    p_info.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
