"""Command-line interface for the full pipeline.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 runtime failure.
Machine-readable output goes to stdout or files; progress and errors go to
stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import models as model_ops
from .config import PipelineConfig, echo_config, load_config, resolve_seed
from .data import (
    DatasetManifest,
    read_feature_store,
    split as split_manifest,
    synth_dataset,
    write_feature_store,
)
from .errors import DataError, FormatError, LeafgraphError, UsageError
from .explain import eigen_cam, grad_cam, render
from .graph import build_adjacency, read_graph, write_graph
from .images import decode_ppm, encode_pgm
from .metrics import report_json, report_table
from .rng import Rng
from .service import serve_forever


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default sys.exit(2) -> usage error 1
        raise UsageError(message)


def _fractions(text: str):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated fractions")
    return tuple(parts)


def build_parser() -> _Parser:
    p = _Parser(prog="leafgraph", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate the synthetic cluster dataset")
    sp.add_argument("--classes", type=int, default=10)
    sp.add_argument("--per-class", type=int, default=50)
    sp.add_argument("--dim", type=int, default=64)
    sp.add_argument("--sigma", type=float, default=0.35)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--images", action="store_true",
                    help="also write degraded 32x32 PGM renderings")

    sp = sub.add_parser("split", help="assign stratified train/val/test splits")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--fractions", type=_fractions, default=(0.8, 0.1, 0.1))
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("build-graph", help="build the similarity graph cache")
    sp.add_argument("--store", required=True)
    sp.add_argument("--manifest", help="restrict to the training split")
    sp.add_argument("--theta", type=float, default=0.7)
    sp.add_argument("--min-degree", type=int, default=3)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("train", help="train one architecture")
    sp.add_argument("--config", required=True)
    sp.add_argument("--arch", choices=model_ops.ARCHS)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--out-dir")

    sp = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--store")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--image-dir")
    sp.add_argument("--graph")
    sp.add_argument("--split", default="test", choices=("train", "val", "test"))
    sp.add_argument("--out")

    sp = sub.add_parser("ablate", help="train and compare all architectures")
    sp.add_argument("--config", required=True)
    sp.add_argument("--arch", action="append", choices=model_ops.ARCHS,
                    help="restrict to one or more architectures")
    sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("explain", help="emit heatmaps for listed samples")
    sp.add_argument("--method", required=True, choices=("gradcam", "eigencam"))
    sp.add_argument("--spatial-store", required=True)
    sp.add_argument("--ids", required=True, help="comma-separated sample ids")
    sp.add_argument("--checkpoint", help="needed for gradcam")
    sp.add_argument("--graph")
    sp.add_argument("--class", dest="class_index", type=int)
    sp.add_argument("--image-dir", help="base images for montages")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("params", help="parameter-count report")
    sp.add_argument("--config")
    sp.add_argument("--checkpoint")

    sp = sub.add_parser("serve", help="run the inference service")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--graph", required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8840)
    return p


def load_images_dir(path) -> dict:
    images = {}
    for f in sorted(Path(path).iterdir()):
        if f.suffix.lower() in (".pgm", ".ppm"):
            images[f.stem] = decode_ppm(f.read_bytes())
    if not images:
        raise DataError(f"no PGM/PPM images under {path}")
    return images


def _load_model(checkpoint, graph_path):
    graph = read_graph(graph_path) if graph_path else None
    return model_ops.load_model(checkpoint, graph)


def _require(cfg: PipelineConfig, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise UsageError(f"config is missing paths.{name}")


def cmd_synth(args) -> int:
    cfg = PipelineConfig()
    resolve_seed(cfg, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = Rng(cfg.model.seed)
    manifest, store, images = synth_dataset(
        args.classes, args.per_class, args.dim, args.sigma, rng,
        make_images=args.images,
    )
    manifest.write_csv(out / "manifest.csv")
    write_feature_store(store, out / "features.lgfs")
    if images is not None:
        img_dir = out / "images"
        img_dir.mkdir(exist_ok=True)
        for sid, arr in images.items():
            (img_dir / f"{sid}.pgm").write_bytes(encode_pgm(arr))
    cfg.manifest = str(out / "manifest.csv")
    cfg.store = str(out / "features.lgfs")
    cfg.out_dir = str(out)
    echo_config(cfg, out, "synth")
    print(json.dumps({"samples": store.n, "dim": args.dim, "out": str(out)}))
    return 0


def cmd_split(args) -> int:
    cfg = PipelineConfig()
    resolve_seed(cfg, args.seed)
    manifest = DatasetManifest.read_csv(args.manifest)
    result = split_manifest(manifest, args.fractions, Rng(cfg.model.seed))
    result.write_csv(args.out)
    cfg.manifest = str(args.out)
    cfg.split_fractions = args.fractions
    echo_config(cfg, Path(args.out).parent, "split")
    counts = {s: len(result.ids(s)) for s in ("train", "val", "test")}
    print(json.dumps(counts))
    return 0


def cmd_build_graph(args) -> int:
    store = read_feature_store(args.store)
    feats = store.pooled_view()
    if args.manifest:
        manifest = DatasetManifest.read_csv(args.manifest)
        rows = [store.ids.index(s) for s in manifest.ids("train")]
        feats = feats[rows]
    graph = build_adjacency(feats, args.theta, args.min_degree)
    write_graph(graph, args.out)
    print(json.dumps({"nodes": graph.n, "edges": graph.edge_count,
                      "theta": args.theta}))
    return 0


def _prepare_training(args):
    cfg = load_config(args.config)
    resolve_seed(cfg, args.seed)
    arch = getattr(args, "arch", None)
    if isinstance(arch, str):  # ablate passes a list, used as a filter instead
        cfg.model = replace(cfg.model, arch=arch)
    if getattr(args, "epochs", None) is not None:
        cfg.model = replace(cfg.model, epochs=args.epochs)
    if getattr(args, "out_dir", None):
        cfg.out_dir = args.out_dir
    _require(cfg, "manifest", "store")
    manifest = DatasetManifest.read_csv(cfg.manifest)
    store = read_feature_store(cfg.store)
    images = load_images_dir(cfg.image_dir) if cfg.image_dir else None
    return cfg, manifest, store, images


def cmd_train(args) -> int:
    cfg, manifest, store, images = _prepare_training(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = model_ops.build(cfg.model, store, manifest, images)
    report = model_ops.train(model, store, manifest, images)
    ckpt = Path(cfg.checkpoint) if cfg.checkpoint else out / "model.lgck"
    model_ops.save_model(model, ckpt)
    if model.graph is not None:
        gpath = Path(cfg.graph_cache) if cfg.graph_cache else out / "graph.lggr"
        write_graph(model.graph, gpath)
    (out / "training-report.json").write_text(
        json.dumps(
            {"first_batch_loss": report.first_batch_loss, "epochs": report.epochs},
            indent=2,
        ),
        encoding="utf-8",
    )
    echo_config(cfg, out, "train")
    print(json.dumps({
        "checkpoint": str(ckpt),
        "epochs": len(report.epochs),
        "final_val_accuracy": report.final_val_accuracy(),
    }))
    return 0


def cmd_eval(args) -> int:
    model = _load_model(args.checkpoint, args.graph)
    manifest = DatasetManifest.read_csv(args.manifest)
    store = read_feature_store(args.store) if args.store else None
    images = load_images_dir(args.image_dir) if args.image_dir else None
    report, _cm = model_ops.evaluate(model, store, manifest, args.split, images)
    text = report_json(report, model.class_table)
    print(text)
    print(report_table(report, model.class_table), file=sys.stderr)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_ablate(args) -> int:
    cfg, manifest, store, images = _prepare_training(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = model_ops.ablate(store, manifest, cfg.model, images, args.arch)
    echo_config(cfg, out, "ablate")
    (out / "ablation.json").write_text(json.dumps(rows, indent=2), encoding="utf-8")
    header = f"{'arch':<12} {'accuracy':>9} {'precision':>10} {'recall':>9} {'f1':>9}"
    lines = [header]
    for r in rows:
        lines.append(
            f"{r['arch']:<12} {r['accuracy']:>9.4f} {r['precision']:>10.4f}"
            f" {r['recall']:>9.4f} {r['f1']:>9.4f}"
        )
    print("\n".join(lines), file=sys.stderr)
    print(json.dumps(rows))
    return 0


def cmd_explain(args) -> int:
    store = read_feature_store(args.spatial_store)
    if store.kind != "spatial":
        raise DataError("explain needs a spatial feature store")
    ids = [s for s in args.ids.split(",") if s]
    model = None
    if args.method == "gradcam":
        if not args.checkpoint:
            raise UsageError("gradcam needs --checkpoint")
        model = _load_model(args.checkpoint, args.graph)
    base_images = load_images_dir(args.image_dir) if args.image_dir else {}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for sid in ids:
        fm = store.row(sid).astype(np.float64)
        if args.method == "eigencam":
            hm = eigen_cam(fm, sid)
        else:
            class_index = args.class_index
            if class_index is None:
                probs = model_ops.predict(model, fm.mean(axis=(0, 1))[None, :])
                class_index = int(probs[0].argmax())
            hm = grad_cam(model, fm, class_index, sid)
        base = base_images.get(sid)
        pgm = out / f"{sid}.{args.method}.pgm"
        montage = out / f"{sid}.{args.method}.montage.ppm" if base else None
        render(hm, base, pgm, montage)
        results.append({"sample_id": sid, "file": str(pgm),
                        "degenerate": hm.degenerate})
    print(json.dumps(results))
    return 0


def cmd_params(args) -> int:
    if args.checkpoint:
        model = model_ops.load_model(args.checkpoint)
    elif args.config:
        cfg = load_config(args.config)
        _require(cfg, "manifest", "store")
        manifest = DatasetManifest.read_csv(cfg.manifest)
        store = read_feature_store(cfg.store)
        images = load_images_dir(cfg.image_dir) if cfg.image_dir else None
        model = model_ops.build(cfg.model, store, manifest, images)
    else:
        raise UsageError("params needs --config or --checkpoint")
    per_layer = {p.name: p.param_count() for p in model.parameters()}
    print(json.dumps({
        "arch": model.config.arch,
        "per_layer": per_layer,
        "total": model_ops.count_parameters(model),
    }, indent=2))
    return 0


def cmd_serve(args) -> int:
    model = _load_model(args.checkpoint, args.graph)
    print(f"serving {model.config.arch} model on {args.host}:{args.port}",
          file=sys.stderr)
    try:
        serve_forever(model, args.host, args.port)
    except OSError as exc:
        raise LeafgraphError(f"cannot bind {args.host}:{args.port}: {exc}") from exc
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "split": cmd_split,
    "build-graph": cmd_build_graph,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "explain": cmd_explain,
    "params": cmd_params,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LeafgraphError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
