"""Command-line interface: dataset building, training, evaluation, serving."""

import argparse
import json
import sys
from pathlib import Path

from .config import RunConfig, desk_config, tiny_config


def _load_config(args):
    if getattr(args, "config", None):
        cfg = RunConfig.load(args.config)
    elif getattr(args, "profile", "paper") == "desk":
        cfg = desk_config()
    elif getattr(args, "profile", "paper") == "tiny":
        cfg = tiny_config()
    else:
        cfg = RunConfig()
    cfg.apply_env()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg.validate()


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def cmd_dataset(args):
    from .synthshape.dataset import build_corpus

    cfg = _load_config(args)
    corpus = build_corpus(cfg.corpus_config(), args.out)
    _log(f"built corpus: {corpus.count('train')} train / {corpus.count('test')} test")
    print(json.dumps({"out": str(args.out),
                      "train": corpus.count("train"),
                      "test": corpus.count("test")}))
    return 0


def cmd_train(args):
    from .pipeline.bundle import run_full_training
    from .synthshape.dataset import Corpus

    cfg = _load_config(args)
    out = Path(args.out)
    if args.stage == "all":
        bundle = run_full_training(cfg, args.corpus, out, log_fn=_log)
        print(json.dumps({"bundle": str(out), "hash": bundle.bundle_hash}))
        return 0
    corpus = Corpus(args.corpus)
    if args.stage == "embedder":
        from .embed.train import contrastive_train
        from .grad import checkpoint as ckpt

        embedder, history = contrastive_train(
            corpus, epochs=cfg.embedder_epochs, batch=cfg.embedder_batch,
            lr=cfg.embedder_lr, embed_dim=cfg.embed_dim, seed=cfg.seed,
            normalize_condition=cfg.normalize_condition, log_fn=_log)
        ckpt.save_checkpoint(out, "joint_embedder", embedder.hyperparameters(),
                             embedder.state_arrays())
        embedder.tokenizer.save(Path(out) / "vocab.json")
    elif args.stage == "stage1":
        from .grad import checkpoint as ckpt
        from .shapeae.train import train_stage1

        model, history = train_stage1(
            corpus, epochs=cfg.stage1_epochs, batch=cfg.stage1_batch,
            lr=cfg.stage1_lr, noise_std=cfg.latent_noise,
            points_per_step=cfg.points_per_step, latent_dim=cfg.latent_dim,
            encoder=cfg.encoder, decoder=cfg.stage1_decoder,
            channels=cfg.encoder_channels, width=cfg.decoder_width,
            blocks=cfg.decoder_blocks, seed=cfg.seed, log_fn=_log)
        ckpt.save_checkpoint(out, "shape_autoencoder", model.hyperparameters(),
                             model.state_arrays())
    elif args.stage == "stage2":
        _log("stage2 alone needs a bundle context; run `train all` "
             "(stage-2 consumes the stage-1 latent table and frozen embedder)")
        return 1
    elif args.stage == "classifier":
        from .evalkit.classifier import train_classifier
        from .grad import checkpoint as ckpt

        model, acc = train_classifier(
            corpus, epochs=cfg.classifier_epochs, lr=cfg.classifier_lr,
            channels=cfg.classifier_channels, seed=cfg.seed, log_fn=_log)
        ckpt.save_checkpoint(out, "voxel_classifier",
                             {"holdout_accuracy": acc,
                              "categories": list(corpus.cfg.categories),
                              "resolution": corpus.cfg.resolution,
                              "channels": list(cfg.classifier_channels)},
                             model.state_arrays())
        _log(f"classifier held-out accuracy {acc:.3f}")
    print(json.dumps({"out": str(out), "stage": args.stage}))
    return 0


def load_classifier(path):
    import numpy as np

    from .evalkit.classifier import VoxelClassifier
    from .grad import checkpoint as ckpt

    manifest, arrays = ckpt.load_checkpoint(path)
    hp = manifest["hyperparameters"]
    model = VoxelClassifier(len(hp["categories"]), hp["resolution"],
                            np.random.default_rng(0),
                            channels=tuple(hp["channels"]))
    model.load_state_arrays(arrays)
    model.eval()
    return model


def cmd_eval(args):
    from .evalkit.queries import QuerySet, build_query_set
    from .evalkit.report import generate_for_queries, run_query_set, write_report
    from .pipeline.bundle import Bundle
    from .synthshape.dataset import Corpus

    bundle = Bundle(args.bundle)
    corpus = Corpus(args.corpus)
    classifier = load_classifier(args.classifier)
    if args.queries:
        qs = QuerySet.load(args.queries, categories=corpus.cfg.categories)
    else:
        qs = build_query_set(categories=corpus.cfg.categories, prefix=args.prefix)
    grids = generate_for_queries(qs, bundle, resolution=args.resolution,
                                 threshold=args.threshold, seed=args.seed)
    report = run_query_set(qs, bundle, classifier, corpus,
                           resolution=args.resolution, threshold=args.threshold,
                           seed=args.seed, grids=grids)
    path = write_report(report, args.out, grids=grids, query_set=qs)
    _log(f"report written to {path}")
    print(report.to_json())
    return 0


def cmd_ablate(args):
    from .evalkit.ablation import run_ablation, write_ablation

    cfg = _load_config(args)
    values = json.loads(args.values)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    table = run_ablation(cfg, args.axis, values, args.out, seeds=seeds, log_fn=_log)
    summary = write_ablation(table, args.axis, args.out)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_generate(args):
    from .pipeline.bundle import Bundle
    from .pipeline.generate import GenerationRequest

    bundle = Bundle(args.bundle)
    req = GenerationRequest(args.prompt, n_samples=args.n, mean_mode=args.mean,
                            threshold=args.threshold, resolution=args.resolution,
                            seed=args.seed)
    shapes = bundle.generate(req)
    out = Path(args.out)
    if len(shapes) == 1 and out.suffix == ".obj":
        out.write_text(shapes[0].mesh.to_obj())
        paths = [str(out)]
    else:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for i, s in enumerate(shapes):
            p = out / f"shape_{i:02d}.obj"
            p.write_text(s.mesh.to_obj())
            paths.append(str(p))
    _log(f"wrote {len(paths)} mesh(es)")
    print(json.dumps({"meshes": paths}))
    return 0


def cmd_interpolate(args):
    from .pipeline.bundle import Bundle

    bundle = Bundle(args.bundle)
    notices = []
    shapes = bundle.interpolate(args.prompt_a, args.prompt_b, args.steps,
                                mode=args.mode, threshold=args.threshold,
                                resolution=args.resolution, notices=notices)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, s in enumerate(shapes):
        p = out / f"step_{i:02d}.obj"
        p.write_text(s.mesh.to_obj())
        paths.append(str(p))
    for n in notices:
        _log(n)
    print(json.dumps({"meshes": paths, "notices": notices}))
    return 0


def cmd_serve(args):
    import uvicorn

    from .pipeline.bundle import Bundle
    from .service.app import create_app

    bundle = Bundle(args.bundle)
    app = create_app(bundle)
    _log(f"serving bundle {bundle.bundle_hash} on port {args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="shapeforge",
                                     description="zero-shot text-to-shape toolkit")
    parser.add_argument("--json", action="store_true",
                        help="emit machine-readable errors on stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset", help="dataset operations")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    b = dsub.add_parser("build", help="generate the shape corpus")
    b.add_argument("--out", required=True)
    b.add_argument("--config")
    b.add_argument("--profile", choices=("paper", "desk", "tiny"), default="desk")
    b.add_argument("--seed", type=int)
    b.set_defaults(fn=cmd_dataset)

    t = sub.add_parser("train", help="train models")
    t.add_argument("stage", choices=("all", "stage1", "stage2", "embedder", "classifier"))
    t.add_argument("--corpus", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config")
    t.add_argument("--profile", choices=("paper", "desk", "tiny"), default="desk")
    t.add_argument("--seed", type=int)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="run a query-set evaluation")
    e.add_argument("--bundle", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--classifier", required=True)
    e.add_argument("--queries", help="query-set JSON (default: generated)")
    e.add_argument("--prefix", default="a")
    e.add_argument("--out", required=True)
    e.add_argument("--resolution", type=int, default=32)
    e.add_argument("--threshold", type=float, default=0.05)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(fn=cmd_eval)

    a = sub.add_parser("ablate", help="run an ablation axis")
    a.add_argument("--axis", required=True)
    a.add_argument("--values", required=True, help="JSON list of axis values")
    a.add_argument("--out", required=True)
    a.add_argument("--config")
    a.add_argument("--profile", choices=("paper", "desk", "tiny"), default="tiny")
    a.add_argument("--seeds", default="0,1,2")
    a.add_argument("--seed", type=int)
    a.set_defaults(fn=cmd_ablate)

    g = sub.add_parser("generate", help="text-to-shape generation")
    g.add_argument("--bundle", required=True)
    g.add_argument("--prompt", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, default=1)
    g.add_argument("--mean", action="store_true")
    g.add_argument("--threshold", type=float, default=0.05)
    g.add_argument("--resolution", type=int, default=32)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(fn=cmd_generate)

    i = sub.add_parser("interpolate", help="interpolate between two prompts")
    i.add_argument("--bundle", required=True)
    i.add_argument("--prompt-a", required=True)
    i.add_argument("--prompt-b", required=True)
    i.add_argument("--steps", type=int, default=5)
    i.add_argument("--mode", choices=("slerp", "lerp"), default="slerp")
    i.add_argument("--threshold", type=float, default=0.05)
    i.add_argument("--resolution", type=int, default=32)
    i.add_argument("--out", required=True)
    i.set_defaults(fn=cmd_interpolate)

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--bundle", required=True)
    s.add_argument("--port", type=int, default=8080)
    s.add_argument("--host", default="127.0.0.1")
    s.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as e:  # noqa: BLE001 - single reporting point for the CLI
        if args.json:
            print(json.dumps({"error": {"type": type(e).__name__, "message": str(e)}}))
        else:
            _log(f"error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
