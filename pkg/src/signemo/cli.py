"""Command line entry point wiring all pipelines together.

Every subcommand logs its resolved configuration and seed, succeeds with exit
code 0, and fails with a machine-readable JSON error line on stderr and exit
code 1 (argparse usage errors exit 2). Artifacts never embed timestamps or
absolute paths, so identical configs and seeds reproduce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import annotation_service, corpus, evaluation, features, llm_baseline, model, synth, weak_labeler
from .labels import LABEL_ORDER

log = logging.getLogger("signemo.cli")

_SEGMENT_KINDS = {
    "full": features.SegmentKind.FULL,
    "random2s": features.SegmentKind.RANDOM_2S,
    "post2s": features.SegmentKind.POST_2S,
}


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _frame_provider(args: argparse.Namespace):
    if args.frames == "synthetic":
        return features.SyntheticFrameProvider(seed=args.seed, signal_strength=args.signal_strength)
    return features.VideoFrameProvider(media_root=getattr(args, "media_root", None))


# ---------------------------------------------------------------------------
# Subcommand implementations

def cmd_validate(args: argparse.Namespace) -> int:
    records = corpus.load_manifest(args.manifest)
    by_source: dict[str, int] = {}
    for rec in records:
        for _, prov in rec.labels:
            by_source[prov.source.value] = by_source.get(prov.source.value, 0) + 1
    summary = {"records": len(records), "labels_by_source": by_source}
    if args.splits:
        splits = corpus.load_splits(args.splits, known_clip_ids={r.clip_id for r in records})
        summary["splits"] = {str(s.name): len(s.clip_ids) for s in splits}
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_weak_label(args: argparse.Namespace) -> int:
    records = corpus.load_manifest(args.manifest)
    clf = weak_labeler.resolve_classifier(args.model_id)
    labeled, run = weak_labeler.weak_label(
        records, clf, min_confidence=args.min_confidence, jobs=args.jobs
    )
    out = Path(args.out)
    corpus.save_manifest(labeled, out)
    run.manifest_out = out.name
    _write_json(out.with_name(out.name + ".report.json"), run.to_dict())
    print(f"labeled {run.records_labeled} of {len(records)} records with {run.model_id}")
    return 0


def cmd_extract_features(args: argparse.Namespace) -> int:
    records = corpus.load_manifest(args.manifest)
    kind = _SEGMENT_KINDS[args.segment]
    strategy = features.SegmentStrategy(
        kind=kind,
        window_s=args.window_s,
        seed=args.seed if kind is features.SegmentKind.RANDOM_2S else None,
    )
    backbone, detector = features.default_stub_extractors(seed=args.seed)
    run = features.extract_manifest_features(
        records,
        features_dir=args.out,
        frame_provider=_frame_provider(args),
        face_backbone=backbone,
        hand_detector=detector,
        strategy=strategy,
        jobs=args.jobs,
    )
    report = {
        "extracted": run.extracted,
        "failed": sorted(run.failed),
        "segments": {cid: list(run.segments[cid]) for cid in sorted(run.segments)},
    }
    _write_json(Path(args.out) / "extraction.report.json", report)
    print(f"extracted {run.extracted} of {len(records)} clips into {args.out}")
    if records and run.extracted == 0:
        raise RuntimeError(f"all {len(records)} extractions failed; first: {run.failed[0]}")
    return 0


def _hyper_from(args: argparse.Namespace) -> model.Hyper:
    return model.Hyper(lr=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)


def cmd_train(args: argparse.Namespace) -> int:
    records = corpus.load_manifest(args.manifest)
    class_weights = None
    if args.class_weighting == "inverse_frequency":
        labels = [model.resolve_training_label(r) for r in records]
        class_weights = model.inverse_frequency_weights(labels)
    config = model.ModelConfig(
        input_dim=512 if args.face_only else args.input_dim,
        hidden1=args.hidden1,
        hidden2=args.hidden2,
        max_seq_len=args.max_seq_len,
        class_weights=class_weights,
    )
    ckpt, history = model.train(
        records,
        args.features,
        config,
        _hyper_from(args),
        source_manifests=[Path(args.manifest).name],
    )
    model.save_checkpoint(ckpt, args.out)
    final = history.epoch_losses[-1] if history.epoch_losses else float("nan")
    print(f"trained {args.epochs} epochs on {len(records)} clips; final loss {final:.4f}")
    return 0


def cmd_finetune(args: argparse.Namespace) -> int:
    base = model.load_checkpoint(args.base)
    records = corpus.load_manifest(args.manifest)
    ckpt, history = model.finetune(
        base,
        records,
        args.features,
        _hyper_from(args),
        freeze_all=args.freeze_all,
        class_weighting=args.class_weighting,
        source_manifests=[Path(args.manifest).name],
    )
    model.save_checkpoint(ckpt, args.out)
    final = history.epoch_losses[-1] if history.epoch_losses else float("nan")
    print(f"fine-tuned {args.epochs} epochs on {len(records)} clips; final loss {final:.4f}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    records = corpus.load_manifest(args.manifest)
    ckpt = model.load_checkpoint(args.checkpoint)
    predictions, skipped = model.predict_manifest(
        records, args.features, ckpt, fail_fast=args.fail_fast
    )
    out = Path(args.out)
    model.save_predictions(predictions, out)
    _write_json(
        out.with_name(out.name + ".report.json"),
        {"n_predictions": len(predictions), "skipped": sorted(skipped)},
    )
    print(f"predicted {len(predictions)} clips ({len(skipped)} skipped)")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    gold_records = {r.clip_id: r for r in corpus.load_manifest(args.gold)}
    predictions = model.load_predictions(args.pred)
    pairs = []
    no_gold: list[str] = []
    for pred in predictions:
        rec = gold_records.get(pred.clip_id)
        gold = evaluation.resolve_gold_label(rec) if rec is not None else None
        if gold is None:
            no_gold.append(pred.clip_id)
            continue
        pairs.append((gold, pred.label))
    predicted_ids = {p.clip_id for p in predictions}
    unpredicted = sorted(
        cid
        for cid, rec in gold_records.items()
        if cid not in predicted_ids and evaluation.resolve_gold_label(rec) is not None
    )
    report = evaluation.evaluate(pairs)
    print(evaluation.format_report(report))
    if no_gold:
        print(f"skipped {len(no_gold)} predictions without a gold label")
    if unpredicted:
        print(f"{len(unpredicted)} gold clips had no prediction")
    if args.out:
        _write_json(
            Path(args.out),
            {
                "report": report.to_dict(),
                "skipped_no_gold": sorted(no_gold),
                "gold_without_prediction": unpredicted,
            },
        )
    return 0


def cmd_agree(args: argparse.Namespace) -> int:
    records = corpus.load_manifest(args.manifest)
    labels_a, labels_b, item_ids = [], [], []
    missing = 0
    for rec in records:
        a = rec.label_from(corpus.LabelSource.ANNOTATOR, args.annotator_a)
        b = rec.label_from(corpus.LabelSource.ANNOTATOR, args.annotator_b)
        if a is None or b is None:
            missing += 1
            continue
        labels_a.append(a)
        labels_b.append(b)
        item_ids.append(rec.clip_id)
    report = evaluation.gwet_ac1(labels_a, labels_b, item_ids=item_ids)
    print(
        f"items {report.n}  p_o {report.p_o:.4f}  p_e {report.p_e:.4f}  ac1 {report.ac1:.4f}  "
        f"consensus {len(report.consensus_ids)}"
    )
    for label in LABEL_ORDER:
        print(f"  {label.value:<9} {report.per_class_consensus[label]}")
    if missing:
        print(f"skipped {missing} records missing a label from either annotator")
    if args.out:
        payload = report.to_dict()
        payload["consensus_ids"] = sorted(report.consensus_ids)
        payload["skipped_missing_label"] = missing
        _write_json(Path(args.out), payload)
    return 0


def cmd_llm_predict(args: argparse.Namespace) -> int:
    records = corpus.load_manifest(args.manifest)
    cfg = llm_baseline.LlmEndpointConfig(
        provider_id=args.provider,
        model_name=args.model,
        max_frames=args.max_frames,
        timeout_s=args.timeout_s,
        retries=args.retries,
    )
    if args.mock:
        transport = llm_baseline.RecordedFixtureTransport(args.mock)
    else:
        endpoint = args.endpoint or os.environ.get("SIGNEMO_LLM_ENDPOINT")
        if not endpoint:
            raise RuntimeError(
                "no endpoint configured: pass --mock FIXTURES, --endpoint URL, "
                "or set SIGNEMO_LLM_ENDPOINT"
            )
        transport = llm_baseline.HttpTransport(endpoint, cfg)
    run = llm_baseline.llm_predict_manifest(
        records,
        frame_provider=_frame_provider(args),
        cfg=cfg,
        transport=transport,
        jobs=args.jobs,
        rate_per_s=args.rate_per_s,
    )
    out = Path(args.out)
    model.save_predictions(run.predictions, out)
    _write_json(out.with_name(out.name + ".report.json"), run.to_dict())
    print(
        f"predicted {len(run.predictions)} clips "
        f"({len(run.unparsable)} unparsable, {len(run.failed)} failed)"
    )
    if records and not run.predictions:
        raise RuntimeError("no clip produced a prediction; see the run report")
    return 0


def cmd_annotate_serve(args: argparse.Namespace) -> int:
    import uvicorn

    records = corpus.load_manifest(args.manifest)
    app = annotation_service.create_app(
        records,
        log_path=args.log,
        annotators=args.annotators.split(",") if args.annotators else None,
        media_dir=args.media_dir,
        context_window=args.context_window,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level=args.log_level.lower())
    return 0


def cmd_synth_fixtures(args: argparse.Namespace) -> int:
    fx = synth.synthesize_fixtures(
        args.out,
        seed=args.seed,
        n_train=args.n_train,
        n_eval=args.n_eval,
        n_held_out=args.n_held_out,
        fps=args.fps,
        hidden1=args.hidden1,
        hidden2=args.hidden2,
    )
    print(
        f"wrote {fx.n_train} train / {fx.n_held_out} held-out / {fx.n_eval} eval clips "
        f"and a base checkpoint under {args.out}"
    )
    return 0


# ---------------------------------------------------------------------------
# Parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    common.add_argument("--jobs", type=int, default=1, help="max parallel workers (default 1)")
    common.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging verbosity",
    )

    frames = argparse.ArgumentParser(add_help=False)
    frames.add_argument(
        "--frames",
        choices=["synthetic", "video"],
        default="synthetic",
        help="frame source: seeded synthetic frames or video decode (optional extra)",
    )
    frames.add_argument(
        "--signal-strength",
        type=float,
        default=1.0,
        help="class-signal strength for synthetic frames (0 disables)",
    )
    frames.add_argument("--media-root", default=None, help="root for relative video paths")

    parser = argparse.ArgumentParser(
        prog="signemo",
        description="Signer emotion recognition pipelines: weak labeling, features, "
        "training, evaluation, agreement, and annotation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a manifest (and splits) against the format rules")
    p.add_argument("--manifest", required=True)
    p.add_argument("--splits", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("weak-label", parents=[common], help="attach text-classifier weak labels to subtitled clips")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model-id", required=True, help="stub-keyword | stub-uniform | stub-constant:<label> | hf:<checkpoint>")
    p.add_argument("--out", required=True)
    p.add_argument("--min-confidence", type=float, default=None)
    p.set_defaults(func=cmd_weak_label)

    p = sub.add_parser("extract-features", parents=[common, frames], help="extract fused per-frame features to .feat files")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--segment", choices=sorted(_SEGMENT_KINDS), default="full")
    p.add_argument("--window-s", type=float, default=2.0)
    p.set_defaults(func=cmd_extract_features)

    train_common = argparse.ArgumentParser(add_help=False)
    train_common.add_argument("--lr", type=float, default=1e-4)
    train_common.add_argument("--epochs", type=int, default=30)
    train_common.add_argument("--batch-size", type=int, default=32)

    p = sub.add_parser("train", parents=[common, train_common], help="train a temporal classifier from scratch")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--input-dim", type=int, default=features.FUSED_DIM)
    p.add_argument("--face-only", action="store_true", help="use only the 512-d face block")
    p.add_argument("--hidden1", type=int, default=512)
    p.add_argument("--hidden2", type=int, default=256)
    p.add_argument("--max-seq-len", type=int, default=300)
    p.add_argument("--class-weighting", choices=["none", "inverse_frequency"], default="none")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("finetune", parents=[common, train_common], help="continue training from a base checkpoint")
    p.add_argument("--base", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    freeze = p.add_mutually_exclusive_group()
    freeze.add_argument("--freeze-all", action="store_true", help="update nothing (checkpoint passthrough)")
    freeze.add_argument("--unfreeze-all", action="store_true", help="update every parameter (the default)")
    p.add_argument("--class-weighting", choices=["none", "inverse_frequency"], default="inverse_frequency")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("predict", parents=[common], help="run a checkpoint over a manifest's features")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fail-fast", action="store_true", help="stop on the first missing feature file")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against gold labels")
    p.add_argument("--gold", required=True, help="manifest carrying the gold labels")
    p.add_argument("--pred", required=True, help="predictions file")
    p.add_argument("--out", default=None, help="optional JSON report path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("agree", parents=[common], help="two-rater agreement and consensus over one manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--annotator-a", required=True)
    p.add_argument("--annotator-b", required=True)
    p.add_argument("--out", default=None, help="optional JSON report path")
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("llm-predict", parents=[common, frames], help="query a vision LLM for one label per clip")
    p.add_argument("--manifest", required=True)
    p.add_argument("--provider", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mock", default=None, help="recorded-fixture JSON instead of a live endpoint")
    p.add_argument("--endpoint", default=None, help="HTTP endpoint URL (or SIGNEMO_LLM_ENDPOINT)")
    p.add_argument("--max-frames", type=int, default=8)
    p.add_argument("--timeout-s", type=float, default=30.0)
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--rate-per-s", type=float, default=None, help="cap on request starts per second")
    p.set_defaults(func=cmd_llm_predict)

    p = sub.add_parser("annotate-serve", parents=[common], help="serve the annotation API (and UI media)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--log", required=True, help="append-only event log path")
    p.add_argument("--annotators", default=None, help="comma-separated allowlist of annotator ids")
    p.add_argument("--media-dir", default=None, help="directory of clip media to serve at /media")
    p.add_argument("--context-window", type=int, default=annotation_service.DEFAULT_CONTEXT_WINDOW)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_annotate_serve)

    p = sub.add_parser("synth-fixtures", parents=[common], help="generate the synthetic dataset fixtures")
    p.add_argument("--out", required=True)
    p.add_argument("--n-train", type=int, default=49)
    p.add_argument("--n-eval", type=int, default=21)
    p.add_argument("--n-held-out", type=int, default=7)
    p.add_argument("--fps", type=float, default=25.0)
    p.add_argument("--hidden1", type=int, default=64)
    p.add_argument("--hidden2", type=int, default=32)
    p.set_defaults(func=cmd_synth_fixtures)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    log.info("run config: %s", json.dumps(config, sort_keys=True, default=str))
    try:
        return args.func(args)
    except Exception as exc:
        print(
            json.dumps(
                {"error": {"command": args.command, "type": type(exc).__name__, "message": str(exc)}}
            ),
            file=sys.stderr,
        )
        log.debug("traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
