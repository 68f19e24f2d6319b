"""Command-line entry point wiring the toolkit into pipeline runs.

Every command resolves its settings as defaults < config file < flags,
then writes a run manifest next to its outputs: input and output hashes,
the config hash, and the model identifiers. Reruns with the same inputs
and the mock provider reproduce outputs byte for byte, so manifests carry
no timestamps.

Exit codes: 0 on success, 1 on domain errors (bad data, failed alignment),
2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

from . import alignment, ingest, qa_answer, qa_gen, segmentation, similarity
from .config import AppConfig, load_config, override
from .errors import AdEvalError, TooFewPairs
from .gateway import Gateway, HttpProvider, MockProvider, Provider
from .model import MCQA, Track, VideoSegment
from .qa_answer import ContextType
from .store import QuestionStore

logger = logging.getLogger(__name__)

CONTEXT_NAMES = {
    "none": ContextType.NO_CONTEXT,
    "movie": ContextType.MOVIE_NAME,
    "dialog": ContextType.DIALOG_ONLY,
    "ad": ContextType.AD_ONLY,
    "dialog+ad": ContextType.DIALOG_PLUS_AD,
}


# ---------------------------------------------------------------------------
# Run manifests


def _sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _config_hash(config: AppConfig) -> str:
    canon = json.dumps(dataclasses.asdict(config), sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _manifest_path(out: Path) -> Path:
    if out.is_dir():
        return out / "run.json"
    return out.with_suffix(".run.json")


def _write_run_manifest(
    out: Path,
    command: str,
    parameters: dict[str, Any],
    inputs: Sequence[str | Path],
    outputs: Sequence[str | Path],
    config: AppConfig,
) -> None:
    manifest = {
        "command": command,
        "parameters": parameters,
        "inputs": {str(p): _sha256_file(p) for p in sorted(map(str, inputs))},
        "outputs": {str(p): _sha256_file(p) for p in sorted(map(str, outputs))},
        "config_sha256": _config_hash(config),
        "models": {
            "completion": config.provider.model,
            "embedding": config.provider.embed_model,
        },
    }
    ingest.write_json(_manifest_path(out), manifest)


# ---------------------------------------------------------------------------
# Shared plumbing


def _build_gateway(config: AppConfig, mock_responses: str | None) -> Gateway:
    provider: Provider
    if config.provider.model == "mock" or not config.provider.endpoint:
        responses: dict[str, Any] = {}
        if mock_responses:
            responses = json.loads(Path(mock_responses).read_text(encoding="utf-8"))
        provider = MockProvider(responses)
    else:
        provider = HttpProvider(config.provider)
    return Gateway(provider, config.provider)


def _load_any_track(path: str | Path, movie_id: str, source_id: str) -> Track:
    """Accept a classified track JSON, a transcript JSONL, or an SRT file."""
    p = Path(path)
    if p.suffix.lower() == ".srt":
        return ingest.parse_srt(p, movie_id, source_id)
    text = p.read_text(encoding="utf-8")
    try:
        whole = json.loads(text)
    except json.JSONDecodeError:
        whole = None
    if isinstance(whole, dict) and "lines" in whole:
        return Track.from_dict(whole)
    return ingest.parse_transcript_text(text, movie_id, source_id)


def _track_ids(path: str | Path) -> tuple[str, str]:
    stem = Path(path).stem
    return stem, stem


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value: Any) -> Any:
    return "" if value is None else value


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_classify(args: argparse.Namespace, config: AppConfig) -> int:
    config = override(config, "alignment", batch_size=args.batch_size)
    manifest = ingest.load_manifest(args.manifest)
    gateway = _build_gateway(config, args.mock_responses)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs: list[Path] = [Path(args.manifest)]
    outputs: list[Path] = []
    for movie in manifest.movies:
        for track_file in movie.track_files:
            inputs.append(Path(track_file))
            source_id = Path(track_file).stem
            track = _load_any_track(track_file, movie.movie_id, source_id)
            classified = alignment.classify_lines(
                track, gateway, batch_size=config.alignment.batch_size
            )
            out_path = out_dir / f"{movie.movie_id}.{source_id}.track.json"
            ingest.write_track(out_path, classified)
            outputs.append(out_path)
            n_ad = len(classified.ad_lines())
            n_dlg = len(classified.dialogue_lines())
            print(f"{out_path}: {n_ad} AD, {n_dlg} dialogue")
    _write_run_manifest(
        out_dir,
        "classify",
        {"batch_size": config.alignment.batch_size},
        inputs,
        outputs,
        config,
    )
    return 0


def _cmd_align(args: argparse.Namespace, config: AppConfig) -> int:
    config = override(
        config, "alignment", threshold=args.threshold, buffer_s=args.buffer
    )
    cfg = config.alignment
    m1, s1 = _track_ids(args.track1)
    m2, s2 = _track_ids(args.track2)
    t1 = _load_any_track(args.track1, m1, s1)
    t2 = _load_any_track(args.track2, m2, s2)
    anchors = alignment.find_anchors(
        t1,
        t2,
        strong_match=cfg.strong_match,
        skip_penalty=cfg.skip_penalty,
        min_anchors=cfg.min_anchors,
    )
    transform = alignment.fit_transform(
        anchors, t1, t2, residual_tol=cfg.residual_tol_s, min_piece=cfg.min_piece
    )
    mapping = alignment.map_ads(
        t1, t2, transform, threshold=cfg.threshold, buffer_s=cfg.buffer_s
    )
    out = Path(args.out)
    ingest.write_mapping(out, mapping, transform, t1, t2)
    n1 = len(t1.ad_lines())
    n2 = len(t2.ad_lines())
    print(
        f"{len(anchors)} anchors, {len(transform.pieces)} transform pieces; "
        f"{len(mapping.pairs)} pairs, "
        f"non-aligned {len(mapping.non_aligned_t1)}/{n1} and "
        f"{len(mapping.non_aligned_t2)}/{n2}"
    )
    _write_run_manifest(
        out,
        "align",
        {"threshold": cfg.threshold, "buffer_s": cfg.buffer_s},
        [args.track1, args.track2],
        [out],
        config,
    )
    return 0


def _sweep_rows(points) -> list[list[Any]]:
    return [[p.threshold, p.non_aligned_percent, _fmt(p.mean_cider)] for p in points]


def _cmd_analyze(args: argparse.Namespace, config: AppConfig) -> int:
    mapping, transform = ingest.read_mapping(args.mapping)
    m1, s1 = _track_ids(args.track1)
    m2, s2 = _track_ids(args.track2)
    t1 = _load_any_track(args.track1, m1, s1)
    t2 = _load_any_track(args.track2, m2, s2)
    gateway = _build_gateway(config, args.mock_responses)
    scores = similarity.pair_scores(mapping, t1, t2, gateway)
    summary = similarity.track_pair_summary(mapping, scores)
    try:
        quadrants = similarity.quadrant_report(scores).to_dict()
    except TooFewPairs:
        logger.warning("fewer than 2 scored pairs; quadrant report omitted")
        quadrants = None
    sweep = alignment.sweep_thresholds(
        t1, t2, transform, config.analysis.sweep_thresholds, buffer_s=mapping.buffer_s
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {"summary": summary, "quadrants": quadrants}
    ingest.write_json(out_dir / "report.json", report)
    _write_csv(
        out_dir / "report.csv",
        ["field", "value"],
        [[k, _fmt(v)] for k, v in sorted(summary.items())],
    )
    _write_csv(
        out_dir / "points_bc.csv",
        ["t1_index", "t2_indices", "bert_sim", "cider"],
        [[s.i, " ".join(map(str, s.t2_indices)), s.bert_sim, s.cider] for s in scores],
    )
    _write_csv(
        out_dir / "sweep.csv",
        ["threshold", "non_aligned_percent", "mean_cider"],
        _sweep_rows(sweep),
    )
    print(f"report written to {out_dir} ({len(scores)} scored pairs)")
    _write_run_manifest(
        out_dir,
        "analyze",
        {"sweep_thresholds": list(config.analysis.sweep_thresholds)},
        [args.mapping, args.track1, args.track2],
        [
            out_dir / "report.json",
            out_dir / "report.csv",
            out_dir / "points_bc.csv",
            out_dir / "sweep.csv",
        ],
        config,
    )
    return 0


def _cmd_sweep(args: argparse.Namespace, config: AppConfig) -> int:
    if args.thresholds:
        values = tuple(float(v) for v in args.thresholds.split(","))
        config = override(config, "analysis", sweep_thresholds=values)
    _, transform = ingest.read_mapping(args.mapping)
    m1, s1 = _track_ids(args.track1)
    m2, s2 = _track_ids(args.track2)
    t1 = _load_any_track(args.track1, m1, s1)
    t2 = _load_any_track(args.track2, m2, s2)
    points = alignment.sweep_thresholds(
        t1, t2, transform, config.analysis.sweep_thresholds
    )
    out = Path(args.out)
    _write_csv(
        out,
        ["threshold", "non_aligned_percent", "mean_cider"],
        _sweep_rows(points),
    )
    for p in points:
        print(f"threshold {p.threshold:g}: non-aligned {p.non_aligned_percent:.2f}%")
    _write_run_manifest(
        out,
        "sweep",
        {"thresholds": list(config.analysis.sweep_thresholds)},
        [args.mapping, args.track1, args.track2],
        [out],
        config,
    )
    return 0


def _cmd_segment(args: argparse.Namespace, config: AppConfig) -> int:
    m, s = _track_ids(args.track)
    track = _load_any_track(args.track, m, s)
    plot = ingest.parse_plot(args.plot)
    gateway = _build_gateway(config, args.mock_responses)
    spans = segmentation.segment_movie(track, plot, gateway)
    segments = segmentation.build_segments(spans, track)
    out = Path(args.out)
    ingest.write_segments(out, segments)
    print(f"{len(segments)} segments written to {out}")
    _write_run_manifest(
        out, "segment", {}, [args.track, args.plot], [out], config
    )
    return 0


def _cmd_genqa(args: argparse.Namespace, config: AppConfig) -> int:
    config = override(config, "answering", nu_style=args.nu_style)
    segments = ingest.read_segments(args.segments)
    gateway = _build_gateway(config, args.mock_responses)
    questions: list[MCQA] = []
    for segment in segments:
        if args.kind in ("va", "both"):
            questions.extend(qa_gen.generate_va(segment, gateway))
        if args.kind in ("nu", "both"):
            questions.extend(
                qa_gen.generate_nu(segment, gateway, style=config.answering.nu_style)
            )
    violations = qa_gen.validate_question_set(questions)
    for v in violations:
        logger.warning("question set: %s", v)
    out = Path(args.out)
    ingest.write_qa_file(out, questions)
    print(f"{len(questions)} questions written to {out}")
    _write_run_manifest(
        out,
        "genqa",
        {"kind": args.kind, "nu_style": config.answering.nu_style},
        [args.segments],
        [out],
        config,
    )
    return 0


def _report_csv_rows(report) -> list[list[Any]]:
    rows = [["ALL", report.n_questions, report.ca, _fmt(report.ac), _fmt(report.cc)]]
    for kind, brk in report.by_kind:
        rows.append([kind, brk.n_questions, brk.ca, _fmt(brk.ac), _fmt(brk.cc)])
    return rows


def _cmd_answer(args: argparse.Namespace, config: AppConfig) -> int:
    ctx_type = CONTEXT_NAMES[args.context]
    questions = ingest.parse_qa_file(args.questions)
    segments = {s.segment_id: s for s in ingest.read_segments(args.segments)}
    gateway = _build_gateway(config, args.mock_responses)
    records = []
    for segment_id in sorted({q.segment_id for q in questions}):
        segment = segments.get(segment_id)
        if segment is None:
            raise AdEvalError(f"questions reference unknown segment {segment_id!r}")
        batch = [q for q in questions if q.segment_id == segment_id]
        # Standalone answering grounds AD contexts in the segment's own ADs.
        ads = list(segment.ad_lines()) if ctx_type in qa_answer._NEEDS_ADS else None
        context = qa_answer.assemble_context(
            segment, ctx_type, ad_source=ads, movie_title=args.movie_title
        )
        records.extend(qa_answer.answer_questions(batch, context, ctx_type, gateway))
    report = qa_answer.score(records, questions, ctx_type)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ingest.write_json(out_dir / "records.json", [r.to_dict() for r in records])
    ingest.write_report(out_dir / "report.json", report)
    _write_csv(
        out_dir / "report.csv",
        ["kind", "n_questions", "ca", "ac", "cc"],
        _report_csv_rows(report),
    )
    print(
        f"{report.n_questions} questions: CA {report.ca:.1f}"
        + ("" if report.ac is None else f", AC {report.ac:.1f}, CC {report.cc:.1f}")
    )
    _write_run_manifest(
        out_dir,
        "answer",
        {"context": args.context},
        [args.questions, args.segments],
        [out_dir / "records.json", out_dir / "report.json", out_dir / "report.csv"],
        config,
    )
    return 0


def _cmd_evaluate(args: argparse.Namespace, config: AppConfig) -> int:
    ctx_type = CONTEXT_NAMES[args.context]
    store = QuestionStore.load(args.store)
    submission = ingest.parse_submission(
        args.submission, known_segments=store.segment_ids()
    )
    gateway = _build_gateway(config, args.mock_responses)
    result = qa_answer.evaluate_submission(
        submission, store, gateway, context_type=ctx_type
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ingest.write_json(out_dir / "result.json", result.to_dict())
    rows = []
    for kind, brk in result.report.by_kind:
        rows.append(
            [
                submission.method_name,
                kind,
                _fmt(brk.cc),
                _fmt(result.ratios.get(kind)),
            ]
        )
    _write_csv(out_dir / "result.csv", ["method", "kind", "cc", "ratio"], rows)
    for method, kind, cc, ratio in rows:
        print(f"{method} {kind}: CC {cc} ratio {ratio}")
    _write_run_manifest(
        out_dir,
        "evaluate",
        {"context": args.context},
        [args.submission],
        [out_dir / "result.json", out_dir / "result.csv"],
        config,
    )
    return 0


def _read_tokens(token_file: str | None, tokens_env: str) -> frozenset[str]:
    if token_file:
        lines = Path(token_file).read_text(encoding="utf-8").splitlines()
        return frozenset(t.strip() for t in lines if t.strip())
    raw = os.environ.get(tokens_env, "")
    return frozenset(t.strip() for t in raw.split(",") if t.strip())


def _cmd_serve(args: argparse.Namespace, config: AppConfig) -> int:
    import uvicorn

    from .service import create_app

    env = os.environ
    config = override(
        config,
        "service",
        host=args.host,
        port=args.port if args.port is not None else _env_int(env, "ADEVAL_PORT"),
        rate_limit=args.rate_limit
        if args.rate_limit is not None
        else _env_int(env, "ADEVAL_RATE_LIMIT"),
        journal_path=args.journal or env.get("ADEVAL_JOURNAL"),
    )
    store_dirs = list(args.store) or [
        p for p in env.get("ADEVAL_STORE", "").split(os.pathsep) if p
    ]
    if not store_dirs:
        raise AdEvalError("no question store given (flag --store or ADEVAL_STORE)")
    stores = {}
    for d in store_dirs:
        store = QuestionStore.load(d)
        stores[store.dataset_id] = store
    token_file = args.token_file or env.get("ADEVAL_TOKEN_FILE")
    tokens = _read_tokens(token_file, config.service.tokens_env)
    if not tokens:
        raise AdEvalError("no API tokens configured; the service would reject everything")
    gateway = _build_gateway(config, args.mock_responses)
    app = create_app(
        stores,
        gateway,
        config.service.journal_path,
        tokens,
        rate_limit=config.service.rate_limit,
    )
    print(
        f"serving {sorted(stores)} on {config.service.host}:{config.service.port}"
    )
    uvicorn.run(app, host=config.service.host, port=config.service.port)
    return 0


def _env_int(env, name: str) -> int | None:
    raw = env.get(name)
    return None if raw is None else int(raw)


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adeval",
        description="Align, compare, and evaluate movie audio description tracks.",
    )
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument(
        "--mock-responses",
        help="JSON file of scripted mock provider replies (activates with the mock model)",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="label transcript lines as AD or dialogue")
    p.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p.add_argument("--out", required=True, help="output directory for labeled tracks")
    p.add_argument("--batch-size", type=int, default=None)
    p.set_defaults(handler=_cmd_classify)

    p = sub.add_parser("align", help="map one AD track onto another")
    p.add_argument("--track1", required=True)
    p.add_argument("--track2", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--buffer", type=float, default=None)
    p.add_argument("--out", default="mapping.json")
    p.set_defaults(handler=_cmd_align)

    p = sub.add_parser("analyze", help="similarity report over a mapping")
    p.add_argument("--mapping", required=True)
    p.add_argument("--track1", required=True)
    p.add_argument("--track2", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_analyze)

    p = sub.add_parser("sweep", help="non-aligned percentage per threshold")
    p.add_argument("--mapping", required=True, help="mapping JSON (for its transform)")
    p.add_argument("--track1", required=True)
    p.add_argument("--track2", required=True)
    p.add_argument("--thresholds", help="comma-separated thresholds")
    p.add_argument("--out", default="sweep.csv")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("segment", help="cut a movie into plot-aligned scenes")
    p.add_argument("--track", required=True)
    p.add_argument("--plot", required=True)
    p.add_argument("--out", default="segments.json")
    p.set_defaults(handler=_cmd_segment)

    p = sub.add_parser("genqa", help="generate multiple-choice questions")
    p.add_argument("--segments", required=True)
    p.add_argument("--kind", choices=["va", "nu", "both"], default="both")
    p.add_argument("--nu-style", choices=["cmd", "mad"], default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_genqa)

    p = sub.add_parser("answer", help="answer questions under a chosen context")
    p.add_argument("--questions", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--context", choices=sorted(CONTEXT_NAMES), default="dialog+ad")
    p.add_argument("--movie-title", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_answer)

    p = sub.add_parser("evaluate", help="score a method submission against a store")
    p.add_argument("--submission", required=True)
    p.add_argument("--store", required=True, help="question store directory")
    p.add_argument("--context", choices=sorted(CONTEXT_NAMES), default="dialog+ad")
    p.add_argument("--out", default="evaluation")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("serve", help="run the submission and leaderboard service")
    p.add_argument("--store", action="append", default=[], help="store directory (repeatable)")
    p.add_argument("--journal", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--rate-limit", type=int, default=None)
    p.add_argument("--token-file", default=None)
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    config = load_config(args.config)
    handler: Callable[[argparse.Namespace, AppConfig], int] = args.handler
    try:
        return handler(args, config)
    except AdEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
