"""Command-line interface.

Exit status: 0 on success, 1 on usage errors, 2 on data or validation errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__, _backend
from .detector import DEFAULT_SIGMA, detect, fit_normality_model, score_frames, smooth_scores
from .evaluation import explanation_map, roc_auc
from .explain import aggregate_frame_scores, saliency_heatmap, write_heatmap_csv, write_heatmap_pgm
from .fileio import (DataError, atomic_write, check_vocab, load_model, read_flags_csv,
                     read_frame_scores_jsonl, read_hoi_jsonl, read_labels_jsonl, read_scores_csv,
                     save_model, write_flags_csv, write_frame_scores_jsonl, write_hoi_jsonl, write_json,
                     write_labels_jsonl, write_scores_csv)
from .gmm import EmConfig
from .hoi_model import BlockLayout, ValidationError, Vocabulary, read_vocab_file
from .synth import ScenarioSpec, generate, generate_training

log = logging.getLogger("hoianomaly")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _echo(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
            if k not in ("func", "verbose")}


def cmd_fit(args) -> None:
    if args.m_min < 1 or args.m_max < args.m_min:
        raise UsageError(f"--m-min/--m-max must satisfy 1 <= m-min <= m-max, got {args.m_min}, {args.m_max}")
    if args.m_override is not None and args.m_override < 1:
        raise UsageError("--m-override must be at least 1")
    if not 0 < args.variance <= 1:
        raise UsageError("--variance must lie in (0, 1]")
    vocab = Vocabulary(read_vocab_file(args.interactions), read_vocab_file(args.objects))
    layout = BlockLayout(len(vocab.interaction_names), len(vocab.object_names))
    frames = read_hoi_jsonl(args.train, layout)
    config = EmConfig(max_iters=args.max_iters, tol=args.tol, ridge=args.ridge,
                      restarts=args.restarts, seed=args.seed)
    model = fit_normality_model(frames, vocab, layout, args.variance, (args.m_min, args.m_max),
                                args.m_override, config)
    model.metadata["command"] = _echo(args)
    save_model(args.out, model)
    print(f"d={model.pca.n_components} (variance {model.pca.variance_captured:.4f}), "
          f"M={model.gmm.n_components}; wrote {args.out}")


def _load_for_input(args):
    model = load_model(args.model)
    if getattr(args, "interactions", None) and getattr(args, "objects", None):
        vocab = Vocabulary(read_vocab_file(args.interactions), read_vocab_file(args.objects))
        check_vocab(model, vocab, f"{args.interactions}, {args.objects}")
    frames = read_hoi_jsonl(args.input, model.layout)
    return model, frames


def cmd_score(args) -> None:
    if not args.sigma > 0:
        raise UsageError("--sigma must be positive")
    model, frames = _load_for_input(args)
    if args.threshold is None:
        scores = smooth_scores(score_frames(model, frames), args.sigma)
        decisions = None
    else:
        decisions, scores = detect(model, frames, args.threshold, args.sigma)
    write_scores_csv(args.out, scores, decisions)
    flagged = "" if decisions is None else f", {sum(decisions)} flagged"
    print(f"scored {len(scores)} frames{flagged}; wrote {args.out}")


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def cmd_explain(args) -> None:
    model, frames = _load_for_input(args)
    if args.frame is not None and args.video is None:
        raise UsageError("--frame requires --video")
    selected = [f for f in frames
                if (args.video is None or f.video_id == args.video)
                and (args.frame is None or f.frame_idx == args.frame)]
    if not selected:
        raise DataError(args.input, None, "no frames match the --video/--frame selection")
    heatmaps = args.heatmaps if args.heatmaps is not None else args.video is not None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if heatmaps:
        (out / "heatmaps").mkdir(exist_ok=True)
    scores = {(s.video_id, s.frame_idx): s for s in score_frames(model, selected)}
    frame_rows, det_rows = [], []
    for f in selected:
        if not f.detections:
            continue
        fs = scores[(f.video_id, f.frame_idx)]
        expl = [saliency_heatmap(model, h) for h in f.detections]
        cls, loc = aggregate_frame_scores(expl)
        frame_rows.append((f.key, {**cls, "location": loc}))
        for k, e in enumerate(expl):
            stem = f"{_safe(f.video_id)}_{f.frame_idx:06d}_{k}"
            row = {
                "video_id": f.video_id, "frame_idx": f.frame_idx, "detection": k,
                "worst": k == fs.worst_hoi_index,
                "top_interaction": e.top_interaction, "top_object": e.top_object,
                "normal_mode": e.normal_mode,
                "deviation": e.total,
                "coarse": e.coarse.tolist(),
                "dominant": e.dominant_block().coarse_label,
                "location_score": e.location_score,
                "top_classes": sorted(e.class_scores, key=e.class_scores.get, reverse=True)[:5],
            }
            if heatmaps:
                write_heatmap_csv(out / "heatmaps" / f"{stem}.csv", e.heatmap)
                write_heatmap_pgm(out / "heatmaps" / f"{stem}.pgm", e.heatmap)
                row["heatmap"] = f"heatmaps/{stem}.csv"
            det_rows.append(row)
    write_frame_scores_jsonl(out / "frame_scores.jsonl", frame_rows)
    with atomic_write(out / "explanations.jsonl") as fh:
        for row in det_rows:
            fh.write(json.dumps(row) + "\n")
    print(f"explained {len(det_rows)} detections in {len(frame_rows)} frames; wrote {out}")


def cmd_eval_auc(args) -> None:
    scores = read_scores_csv(args.scores)
    flags = read_flags_csv(args.flags)
    y, smoothed, raw = [], [], []
    for s in scores:
        key = (s.video_id, s.frame_idx)
        if key not in flags:
            raise DataError(args.flags, None, f"no flag for frame {s.video_id}/{s.frame_idx}")
        y.append(flags[key])
        raw.append(s.raw_score)
        smoothed.append(s.smoothed_score if math.isfinite(s.smoothed_score) else s.raw_score)
    try:
        report = {"auc": roc_auc(smoothed, y), "auc_raw": roc_auc(raw, y)}
    except ValueError as exc:
        raise DataError(args.flags, None, str(exc)) from None
    report.update(n_frames=len(y), n_anomalous=int(sum(y)), config=_echo(args))
    write_json(args.out, report)
    print(f"AUC {report['auc']:.4f} (raw {report['auc_raw']:.4f}); wrote {args.out}")


def cmd_eval_map(args) -> None:
    pred = read_frame_scores_jsonl(args.pred)
    truth = read_labels_jsonl(args.truth)
    class_filter = None
    if args.class_filter:
        class_filter = read_vocab_file(args.class_filter)
    try:
        m, per_class = explanation_map(pred, truth, class_filter)
    except ValueError as exc:
        raise DataError(args.truth, None, str(exc)) from None
    positives = truth.positives()
    excluded = sorted(c for c in (class_filter or []) if c not in positives)
    report = {"map": m, "per_class_ap": per_class, "n_classes": len(per_class),
              "excluded_classes_without_positives": excluded, "config": _echo(args)}
    write_json(args.out, report)
    print(f"mAP {m:.4f} over {len(per_class)} classes; wrote {args.out}")


def cmd_synth(args) -> None:
    try:
        spec = ScenarioSpec.from_json(args.spec)
    except json.JSONDecodeError as exc:
        raise DataError(args.spec, exc.lineno, f"invalid JSON: {exc.msg}") from None
    except (TypeError, ValueError, KeyError) as exc:
        raise DataError(args.spec, None, f"invalid scenario: {exc}") from None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames, truth = generate(spec)
    write_hoi_jsonl(out / "train.jsonl", generate_training(spec))
    write_hoi_jsonl(out / "test.jsonl", frames)
    write_flags_csv(out / "flags.csv", truth.frame_flags)
    write_labels_jsonl(out / "labels.jsonl", truth)
    spec.vocabulary().write(out / "interactions.txt", out / "objects.txt")
    write_json(out / "spec.json", spec.to_dict())
    print(f"wrote {len(frames)} test frames, {sum(truth.frame_flags.values())} anomalous, to {out}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hoianomaly", description="Interpretable HOI-vector anomaly detection.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({_backend.BACKEND} kernels)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="{fit,score,explain,eval-auc,eval-map,synth}")
    sub.required = True

    f = sub.add_parser("fit", help="fit the PCA + GMM normality model")
    f.add_argument("--train", required=True, type=Path)
    f.add_argument("--interactions", required=True, type=Path, help="interaction vocabulary, one name per line")
    f.add_argument("--objects", required=True, type=Path, help="object vocabulary, one name per line")
    f.add_argument("--variance", type=float, default=0.99)
    f.add_argument("--m-min", type=int, default=1)
    f.add_argument("--m-max", type=int, default=10)
    f.add_argument("--m-override", type=int)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--restarts", type=int, default=5)
    f.add_argument("--max-iters", type=int, default=300)
    f.add_argument("--tol", type=float, default=1e-6)
    f.add_argument("--ridge", type=float, default=1e-6)
    f.add_argument("--out", required=True, type=Path)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("score", help="per-frame anomaly scores")
    s.add_argument("--model", required=True, type=Path)
    s.add_argument("--input", required=True, type=Path)
    s.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    s.add_argument("--threshold", type=float)
    s.add_argument("--interactions", type=Path, help="check against the model's vocabulary")
    s.add_argument("--objects", type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_score)

    e = sub.add_parser("explain", help="saliency heatmaps and per-frame explanation scores")
    e.add_argument("--model", required=True, type=Path)
    e.add_argument("--input", required=True, type=Path)
    e.add_argument("--video")
    e.add_argument("--frame", type=int)
    e.add_argument("--heatmaps", action=argparse.BooleanOptionalAction, default=None,
                   help="write per-detection heatmaps (default: only when --video is given)")
    e.add_argument("--interactions", type=Path)
    e.add_argument("--objects", type=Path)
    e.add_argument("--out-dir", required=True, type=Path)
    e.set_defaults(func=cmd_explain)

    a = sub.add_parser("eval-auc", help="frame-level ROC AUC")
    a.add_argument("--scores", required=True, type=Path)
    a.add_argument("--flags", required=True, type=Path)
    a.add_argument("--out", required=True, type=Path)
    a.set_defaults(func=cmd_eval_auc)

    m = sub.add_parser("eval-map", help="explanation mAP")
    m.add_argument("--pred", required=True, type=Path)
    m.add_argument("--truth", required=True, type=Path)
    m.add_argument("--class-filter", type=Path, help="class keys to evaluate, one per line")
    m.add_argument("--out", required=True, type=Path)
    m.set_defaults(func=cmd_eval_map)

    y = sub.add_parser("synth", help="generate a synthetic scenario")
    y.add_argument("--spec", required=True, type=Path, help="scenario JSON; {} gives the default scenario")
    y.add_argument("--out-dir", required=True, type=Path)
    y.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hoianomaly: error: {exc}", file=sys.stderr)
        return 1
    except (ValidationError, OSError, ValueError) as exc:
        print(f"hoianomaly: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
