"""Command line entry point wiring the pipeline together.

Every subcommand maps onto one library operation and prints line-oriented
JSON, so the pipeline can be scripted end to end:

    slimweb features extract --file app.js --out features.jsonl
    slimweb dataset build --corpus crawl/ --out dataset.jsonl
    slimweb rfe --dataset dataset.jsonl --target-k 508 --out vocab.txt
    slimweb train --dataset dataset.jsonl --out model.json
    slimweb eval --model model.json --dataset dataset.jsonl
    slimweb classify --model model.json --file app.js
    slimweb serve --listen 127.0.0.1:8300 --model model.json --store labels.db
    slimweb proxy --listen 127.0.0.1:8380 --store labels.db
    slimweb bench --page http://host/page.html --proxy 127.0.0.1:8380
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench as bench_mod
from .categories import CATEGORIES
from .corpus import build_dataset, builtin_entities, load_entities, read_corpus_dir
from .dataset import LabeledDataset
from .features import (
    builtin_catalog,
    extract_features,
    load_api_catalog,
    save_vocabulary,
    write_feature_matrix,
)
from .model import (
    TrainConfig,
    assign_category,
    evaluate,
    init_model,
    load_model,
    save_model,
    train,
)
from .rfe import RfeConfig, rfe_select
from .store import LabelStore, StoreConfig, default_policy, load_policy
from .service import ServiceConfig, serve


def _parse_listen(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def _vocab(path: str | None):
    return load_api_catalog(path) if path else builtin_catalog()


def _entities(path: str | None):
    return load_entities(path) if path else builtin_entities()


def _cmd_features_extract(args) -> int:
    vocab = _vocab(args.catalog)
    rows = []
    for file in args.file:
        source = Path(file).read_bytes()
        rows.append((file, None, extract_features(source, vocab)))
    count = write_feature_matrix(args.out, rows)
    print(json.dumps({"rows": count, "vocab_version": vocab.version,
                      "out": args.out}))
    return 0


def _cmd_dataset_build(args) -> int:
    vocab = _vocab(args.catalog)
    repo = _entities(args.entities)
    scripts = read_corpus_dir(args.corpus)
    dataset, unlabeled = build_dataset(scripts, repo, vocab)
    dataset.to_jsonl(args.out)
    if args.unlabeled_out:
        write_feature_matrix(
            args.unlabeled_out,
            ((r.key, None, extract_features(r.source, vocab)) for r in unlabeled),
        )
    print(json.dumps({
        "labeled": len(dataset),
        "unlabeled": len(unlabeled),
        "per_category": dataset.category_counts(),
        "out": args.out,
    }))
    return 0


def _cmd_rfe(args) -> int:
    vocab = _vocab(args.catalog)
    dataset = LabeledDataset.from_jsonl(args.dataset)
    cfg = RfeConfig(target_k=args.target_k, step=args.step)
    selected, eliminated = rfe_select(dataset, vocab, cfg)
    save_vocabulary(selected, args.out)
    print(json.dumps({
        "selected": len(selected),
        "eliminated": len(eliminated),
        "vocab_version": selected.version,
        "out": args.out,
    }))
    return 0


def _cmd_train(args) -> int:
    dataset = LabeledDataset.from_jsonl(args.dataset)
    model = init_model(
        dataset.n_features, seed=args.seed, vocab_version=dataset.vocab_version
    )
    cfg = TrainConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        l2_penalty=args.l2,
        early_stop_patience=args.patience,
    )
    trained, losses = train(model, dataset, cfg)
    version = save_model(trained, args.out, threshold_default=args.threshold)
    print(json.dumps({
        "model_version": version,
        "epochs": len(losses) - 1,
        "initial_loss": losses[0],
        "final_loss": losses[-1],
        "out": args.out,
    }))
    return 0


def _cmd_eval(args) -> int:
    model, _ = load_model(args.model)
    dataset = LabeledDataset.from_jsonl(args.dataset)
    report = evaluate(model, dataset)
    print(json.dumps(report.to_dict()))
    return 0


def _cmd_classify(args) -> int:
    model, default_threshold = load_model(args.model)
    threshold = args.threshold if args.threshold is not None else default_threshold
    vocab = _vocab(args.catalog)
    if model.vocab_version and model.vocab_version != vocab.version:
        raise SystemExit(_error(
            f"model expects vocabulary {model.vocab_version}, "
            f"got {vocab.version}"
        ))
    source = Path(args.file).read_bytes()
    result = assign_category(model, extract_features(source, vocab), threshold)
    print(json.dumps({
        "category": result.category,
        "confidence": result.confidence,
    }))
    return 0


def _cmd_serve(args) -> int:
    config = ServiceConfig(
        listen=_parse_listen(args.listen),
        store_path=args.store,
        model_path=args.model,
        vocab_path=args.catalog,
        page_list_path=args.page_list,
        refresh_period=args.refresh_period,
        allow_miss_classification=not args.no_miss_classification,
    )
    serve(config)
    return 0


def _cmd_proxy(args) -> int:
    from .proxy import run_proxy

    store = LabelStore(StoreConfig(path=args.store))
    policy = load_policy(args.policy) if args.policy else default_policy()
    mitm = None
    if args.mitm_ca:
        if not args.mitm_key:
            raise SystemExit(_error("--mitm-ca requires --mitm-key"))
        mitm = (args.mitm_ca, args.mitm_key)
    proxy = run_proxy(
        listen=_parse_listen(args.listen),
        store=store,
        policy=policy,
        admin_listen=_parse_listen(args.admin_listen) if args.admin_listen else None,
        mitm_ca=mitm,
        upstream_cafile=args.upstream_ca,
    )
    print(json.dumps({"listening": "%s:%d" % proxy.address}), flush=True)
    try:
        proxy._server.serve_forever()
    except KeyboardInterrupt:
        proxy.shutdown()
    return 0


def _cmd_bench(args) -> int:
    report = bench_mod.bench(args.page, args.proxy)
    print(report.to_json())
    return 0


def _error(message: str) -> int:
    print(json.dumps({"error": message}), file=sys.stderr)
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slimweb",
        description="classify page JavaScript and block the non-critical part",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    features = sub.add_parser("features", help="feature extraction")
    features_sub = features.add_subparsers(dest="subcommand", required=True)
    extract = features_sub.add_parser("extract", help="JS files to count vectors")
    extract.add_argument("--file", action="append", required=True)
    extract.add_argument("--catalog", help="vocabulary file (default: bundled)")
    extract.add_argument("--out", required=True)
    extract.set_defaults(func=_cmd_features_extract)

    dataset = sub.add_parser("dataset", help="dataset building")
    dataset_sub = dataset.add_subparsers(dest="subcommand", required=True)
    build = dataset_sub.add_parser("build", help="corpus dir to labeled JSONL")
    build.add_argument("--corpus", required=True)
    build.add_argument("--entities", help="entities file (default: bundled)")
    build.add_argument("--catalog")
    build.add_argument("--out", required=True)
    build.add_argument("--unlabeled-out")
    build.set_defaults(func=_cmd_dataset_build)

    rfe = sub.add_parser("rfe", help="recursive feature elimination")
    rfe.add_argument("--dataset", required=True)
    rfe.add_argument("--catalog")
    rfe.add_argument("--target-k", type=int, default=508)
    rfe.add_argument("--step", type=int)
    rfe.add_argument("--out", required=True)
    rfe.set_defaults(func=_cmd_rfe)

    train_p = sub.add_parser("train", help="train the classifier")
    train_p.add_argument("--dataset", required=True)
    train_p.add_argument("--out", required=True)
    train_p.add_argument("--learning-rate", type=float,
                         default=TrainConfig.learning_rate)
    train_p.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    train_p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    train_p.add_argument("--seed", type=int, default=TrainConfig.seed)
    train_p.add_argument("--l2", type=float, default=TrainConfig.l2_penalty)
    train_p.add_argument("--patience", type=int,
                         default=TrainConfig.early_stop_patience)
    train_p.add_argument("--threshold", type=float, default=0.5,
                         help="default confidence threshold stored in the model")
    train_p.set_defaults(func=_cmd_train)

    eval_p = sub.add_parser("eval", help="evaluate a model on a dataset")
    eval_p.add_argument("--model", required=True)
    eval_p.add_argument("--dataset", required=True)
    eval_p.set_defaults(func=_cmd_eval)

    classify = sub.add_parser("classify", help="classify one JS file")
    classify.add_argument("--model", required=True)
    classify.add_argument("--file", required=True)
    classify.add_argument("--catalog")
    classify.add_argument("--threshold", type=float)
    classify.set_defaults(func=_cmd_classify)

    serve_p = sub.add_parser("serve", help="run the label service")
    serve_p.add_argument("--listen", default="127.0.0.1:8300")
    serve_p.add_argument("--store", required=True)
    serve_p.add_argument("--model", required=True)
    serve_p.add_argument("--catalog")
    serve_p.add_argument("--page-list")
    serve_p.add_argument("--refresh-period", type=float, default=24 * 3600.0)
    serve_p.add_argument("--no-miss-classification", action="store_true")
    serve_p.set_defaults(func=_cmd_serve)

    proxy_p = sub.add_parser("proxy", help="run the blocking proxy")
    proxy_p.add_argument("--listen", default="127.0.0.1:8380")
    proxy_p.add_argument("--store", required=True)
    proxy_p.add_argument("--policy", help="policy JSON (default: ads+analytics)")
    proxy_p.add_argument("--mitm-ca", help="CA certificate PEM for TLS interception")
    proxy_p.add_argument("--mitm-key", help="CA private key PEM")
    proxy_p.add_argument("--upstream-ca", help="extra CA bundle for upstream TLS")
    proxy_p.add_argument("--admin-listen", help="host:port for GET /telemetry")
    proxy_p.set_defaults(func=_cmd_proxy)

    bench_p = sub.add_parser("bench", help="direct vs proxied page fetch report")
    bench_p.add_argument("--page", required=True)
    bench_p.add_argument("--proxy", required=True)
    bench_p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(name)s %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (OSError, ValueError) as exc:
        return _error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
