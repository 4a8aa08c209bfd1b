"""Single command-line entry point for the whole pipeline.

Subcommands: prepare, split, train, task {reconstruct|transfer|edit|batch},
eval, bench, serve. Config files are TOML (JSON also accepted) with [train]
and [model] tables; command-line flags override file values. Exit codes:
0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

log = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_config_file(path: str) -> dict:
    text = Path(path).read_bytes()
    if path.endswith(".json"):
        return json.loads(text)
    try:
        import tomllib  # py >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        return tomllib.loads(text.decode())
    except Exception:
        return json.loads(text)


def _train_config(args):
    from .train import TrainConfig

    payload = {}
    if args.config:
        payload.update(_load_config_file(args.config).get("train", {}))
    for field in ("lr", "beta1", "beta2", "epochs", "batch_size", "seed",
                  "checkpoint_every", "log_every"):
        value = getattr(args, field, None)
        if value is not None:
            payload[field] = value
    return TrainConfig.from_dict(payload)


def _model_config(args):
    from .models import ModelConfig

    payload = {}
    if args.config:
        payload.update(_load_config_file(args.config).get("model", {}))
    if getattr(args, "base_channels", None) is not None:
        payload["base_channels"] = args.base_channels
    if "stage_resolutions" in payload:
        payload["stage_resolutions"] = tuple(payload["stage_resolutions"])
    return ModelConfig(**payload)


def _load_records(manifest_path: str, split_path: str | None, subset: str):
    from .data import load_sample, load_split, read_manifest

    entries = read_manifest(manifest_path)
    if split_path:
        split = load_split(split_path)
        wanted = set(split.train_ids if subset == "train" else split.test_ids)
        entries = [e for e in entries if e["id"] in wanted]
    return [load_sample(e) for e in entries]


def _load_model(checkpoint: str):
    from .checkpoint import load_checkpoint

    model, meta, _ = load_checkpoint(checkpoint)
    model.eval()
    return model, meta


def _record_from_files(image_path: str, mask_path: str, sample_id: str):
    from .data import load_sample

    return load_sample({"id": sample_id, "image_path": image_path,
                        "mask_path": mask_path})


def _cmd_prepare(args) -> int:
    from .data import ingest_corpus

    entries = ingest_corpus(args.images, args.masks, args.out)
    print(f"wrote {len(entries)} entries to {args.out}")
    return 0


def _cmd_split(args) -> int:
    from .data import make_split, read_manifest, save_split

    manifest = read_manifest(args.manifest)
    split = make_split(manifest, train_fraction=args.train_fraction, seed=args.seed)
    save_split(split, args.out)
    print(f"split {len(split.train_ids)} train / {len(split.test_ids)} test -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    from .train import train

    config = _train_config(args)
    records = _load_records(args.manifest, args.split, "train")
    final = train(records, config, _model_config(args), out_dir=args.out_dir,
                  resume_from=args.resume, max_steps=args.max_steps)
    print(f"final checkpoint: {final}")
    return 0


def _cmd_task(args) -> int:
    import torch

    from . import tasks
    from .data import save_image_png

    model, _ = _load_model(args.checkpoint)

    if args.kind == "batch":
        if not args.requests:
            raise UsageError("task batch requires --requests")
        spec = json.loads(Path(args.requests).read_text())
        requests = []
        for item in spec:
            source = _record_from_files(item["source_image"], item["source_mask"],
                                        item.get("id", Path(item["source_image"]).stem))
            reference = None
            if item.get("reference_image"):
                reference = _record_from_files(item["reference_image"],
                                               item["reference_mask"],
                                               Path(item["reference_image"]).stem)
            edited_mask = None
            if item.get("edited_mask"):
                edited = _record_from_files(item["edited_mask"], item["edited_mask"], "m")
                edited_mask = edited.mask
            requests.append(tasks.EditRequest(source=source, reference=reference,
                                              edited_mask=edited_mask,
                                              seed=item.get("seed", args.seed)))
        written = tasks.run_requests(requests, model, args.out_dir)
        print(f"wrote {len(written)} images to {args.out_dir}")
        return 0

    source = _record_from_files(args.source_image, args.source_mask, "source")
    if args.kind == "reconstruct":
        output = tasks.reconstruct(source, model, seed=args.seed)
    elif args.kind == "transfer":
        if not (args.reference_image and args.reference_mask):
            raise UsageError("transfer requires --reference-image and --reference-mask")
        reference = _record_from_files(args.reference_image, args.reference_mask,
                                       "reference")
        output = tasks.transfer_style(source, reference, model, seed=args.seed)
    else:  # edit
        if not args.edited_mask:
            raise UsageError("edit requires --edited-mask")
        edited = _record_from_files(args.edited_mask, args.edited_mask, "edited")
        reference = None
        if args.reference_image and args.reference_mask:
            reference = _record_from_files(args.reference_image, args.reference_mask,
                                           "reference")
        output = tasks.edit_shape(source, reference, edited.mask, model, seed=args.seed)
    save_image_png(output, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_eval(args) -> int:
    from .metrics import PoolingFeatures, evaluate_task, write_report

    model, _ = _load_model(args.checkpoint)
    records = _load_records(args.manifest, args.split, "test")
    extractor = PoolingFeatures() if args.features == "pooling" else None
    report = evaluate_task(model, records, args.task, n_pairs=args.pairs,
                           seed=args.seed, feature_extractor=extractor)
    write_report(report, args.out)
    print(json.dumps(report.as_dict(), sort_keys=True))
    return 0


def _cmd_bench(args) -> int:
    from .metrics import benchmark_fps, write_report

    model, _ = _load_model(args.checkpoint)
    report = benchmark_fps(model, args.images, args.masks,
                           Path(args.out_dir) / "bench_outputs",
                           n_images=args.n_images, seed=args.seed)
    write_report(report, Path(args.out_dir) / "bench_report.json")
    print(json.dumps(report.as_dict(), sort_keys=True))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(checkpoint_path=args.checkpoint, lanes=args.lanes)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="hairsynth",
                     description="Conditional-GAN hair synthesis pipeline")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("prepare", help="pair images with masks into a manifest")
    p.add_argument("--images", required=True, help="directory of RGB images")
    p.add_argument("--masks", required=True, help="directory of binary hair masks")
    p.add_argument("--out", required=True, help="output manifest (JSON lines)")
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("split", help="deterministic train/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--train-fraction", type=float, default=0.8,
                   help="train share (default 0.8: 56000/14000 on 70000 ids)")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed (default 0)")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train", help="adversarial training")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default=None, help="optional split file; trains on its train ids")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", default=None, help="TOML/JSON config with [train] and [model]")
    p.add_argument("--lr", type=float, default=None, help="learning rate (default 0.0001)")
    p.add_argument("--beta1", type=float, default=None, help="Adam beta1 (default 0.5)")
    p.add_argument("--beta2", type=float, default=None, help="Adam beta2 (default 0.999)")
    p.add_argument("--epochs", type=int, default=None, help="training epochs (default 55)")
    p.add_argument("--batch-size", type=int, default=None, help="batch size (default 8)")
    p.add_argument("--seed", type=int, default=None, help="training seed (default 0)")
    p.add_argument("--checkpoint-every", type=int, default=None,
                   help="epochs between checkpoints (default 5)")
    p.add_argument("--log-every", type=int, default=None,
                   help="steps between loss-log lines (default 1)")
    p.add_argument("--base-channels", type=int, default=None,
                   help="model width; default 64 lands near the 33M-parameter target")
    p.add_argument("--resume", default=None, help="training checkpoint to resume from")
    p.add_argument("--max-steps", type=int, default=None, help="hard step cap (debug)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("task", help="run one synthesis task")
    p.add_argument("kind", choices=["reconstruct", "transfer", "edit", "batch"])
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--source-image")
    p.add_argument("--source-mask")
    p.add_argument("--reference-image")
    p.add_argument("--reference-mask")
    p.add_argument("--edited-mask", help="edited hair mask PNG (edit task)")
    p.add_argument("--requests", help="JSON list of requests (batch task)")
    p.add_argument("--out", default="task_output.png")
    p.add_argument("--out-dir", default="task_outputs")
    p.add_argument("--seed", type=int, default=None, help="noise seed (default 0, fixed)")
    p.set_defaults(func=_cmd_task)

    p = sub.add_parser("eval", help="FID/PSNR/SSIM over task outputs")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default=None, help="optional split file; evaluates its test ids")
    p.add_argument("--task", choices=["reconstruction", "transfer"], default="reconstruction")
    p.add_argument("--pairs", type=int, default=5000,
                   help="evaluation pairs (default 5000, as in the reference protocol)")
    p.add_argument("--seed", type=int, default=0, help="pair-sampling seed (default 0)")
    p.add_argument("--features", choices=["inception", "pooling"], default="inception",
                   help="FID feature extractor; inception needs provisioned weights")
    p.add_argument("--out", default="metrics_report.json")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="single-stream throughput benchmark")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-images", type=int, default=500,
                   help="images to synthesize (default 500, per the reference protocol)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("serve", help="HTTP inference service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--lanes", type=int, default=1,
                   help="concurrent model-execution lanes (default 1)")
    p.set_defaults(func=_cmd_serve)
    return parser


def dispatch(argv: list[str]) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help paths
        return 0 if exc.code in (0, None) else 1
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
