"""Operator entry point: the ``probe`` command.

Subcommands cover the full workflow: ``run`` composes the three pipeline
stages; ``validate``/``enumerate``/``extract`` run them standalone so a
crashed or exploratory run can resume from the translation cache; ``curve``
produces the BLEU-decline data; ``report`` renders summaries from a run plus
an annotation log; ``serve`` hosts the triage API and UI; ``export`` dumps
the annotation log.

Exit codes: 0 success, 1 pipeline or domain error, 2 usage or config error.
Machine output goes to files (or stdout for export); diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from . import analysis, annotation, pipeline, runio, service
from .errors import ConfigError, ProbeError
from .metric import MetricTokenization, mean_bleu
from .pipeline import RunConfig
from .text_units import UnitKind
from .translator import TranslationCache, build_backend

CACHE_DIR_ENV = "PROBE_CACHE_DIR"
CACHE_FILE = "translations.bin"
DELETIONS_FILE = "deletions.jsonl"
SUMMARY_JSON = "summary.json"
SUMMARY_MD = "summary.md"


def _eprint(*args):
    print(*args, file=sys.stderr)


def load_config_file(path: str) -> tuple[dict, Path]:
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(config_path, "rb") as fh:
            return tomllib.load(fh), config_path.parent
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _resolve(base: Path, value: str | None) -> str | None:
    if value is None:
        return None
    path = Path(value)
    return str(path if path.is_absolute() else base / path)


def build_run_config(raw: dict, base: Path, args) -> RunConfig:
    """Merge the [run]/[backend]/[segmenter]/[parallel] tables with CLI
    overrides; overrides win."""
    run_table = raw.get("run", {})
    parallel = raw.get("parallel", {})
    backend_spec = dict(raw.get("backend", {}))
    for key in ("mapping_file", "path"):
        if key in backend_spec:
            backend_spec[key] = _resolve(base, backend_spec[key])
    if getattr(args, "backend", None):
        try:
            backend_spec = json.loads(args.backend)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--backend must be a JSON object: {exc}") from exc
    segmenter = raw.get("segmenter", {})
    lexicon = getattr(args, "lexicon", None) or _resolve(base, segmenter.get("lexicon"))

    def pick(override, key, default):
        return override if override is not None else run_table.get(key, default)

    scheme = pick(getattr(args, "metric_tokenization", None), "metric_tokenization", "auto")
    try:
        unit = UnitKind(pick(getattr(args, "unit", None), "unit", "char"))
        tokenization = None if scheme == "auto" else MetricTokenization(scheme)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    batch_size = pick(getattr(args, "batch_size", None), "batch_size", parallel.get("batch_size", 0))
    command = segmenter.get("command")
    return RunConfig(
        unit=unit,
        valid_threshold=float(
            pick(getattr(args, "valid_threshold", None), "valid_threshold", 0.5)
        ),
        candidate_threshold=float(
            pick(getattr(args, "candidate_threshold", None), "candidate_threshold", 0.1)
        ),
        metric_tokenization=tokenization,
        max_ngram_order=int(run_table.get("max_ngram_order", 4)),
        backend=backend_spec or None,
        lexicon_path=lexicon,
        segmenter_cmd=tuple(command) if command else None,
        seed=int(pick(getattr(args, "seed", None), "seed", 0)),
        exclude_separator_units=bool(run_table.get("exclude_separator_units", False)),
        batch_size=int(batch_size) or None,
        max_workers=int(
            pick(getattr(args, "max_workers", None), "max_workers",
                 parallel.get("max_workers", os.cpu_count() or 1))
        ),
        label=pick(getattr(args, "label", None), "label", ""),
    )


def load_corpus(raw: dict, base: Path) -> list[pipeline.TestPair]:
    corpus = raw.get("corpus", {})
    if "tsv" in corpus:
        return runio.load_corpus_tsv(_resolve(base, corpus["tsv"]))
    if "source" in corpus and "reference" in corpus:
        return runio.load_corpus_aligned(
            _resolve(base, corpus["source"]), _resolve(base, corpus["reference"])
        )
    raise ConfigError("config needs [corpus] with either tsv= or source= and reference=")


def open_cache(raw: dict, base: Path, out_dir: Path) -> TranslationCache:
    env_dir = os.environ.get(CACHE_DIR_ENV)
    if env_dir:
        cache_dir = Path(env_dir)
    elif raw.get("cache", {}).get("dir"):
        cache_dir = Path(_resolve(base, raw["cache"]["dir"]))
    else:
        cache_dir = out_dir / "cache"
    return TranslationCache(cache_dir / CACHE_FILE)


def _write_summary(run_result, annotations, out_dir: Path) -> None:
    row = analysis.summarize(run_result, annotations)
    payload = {
        "rows": [row.to_dict()],
        "backend_fingerprint": run_result.backend_fingerprint,
        "metric_policy": run_result.metric_policy,
    }
    with open(out_dir / SUMMARY_JSON, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
    (out_dir / SUMMARY_MD).write_text(
        analysis.render_summary_markdown([row]), encoding="utf-8"
    )


def cmd_run(args) -> int:
    raw, base = load_config_file(args.config)
    config = build_run_config(raw, base, args)
    corpus = load_corpus(raw, base)
    if not config.backend:
        raise ConfigError("config needs a [backend] table or --backend override")
    backend = build_backend(config.backend)
    out_dir = Path(args.out)
    with open_cache(raw, base, out_dir) as cache:
        result = pipeline.run(corpus, config, backend=backend, cache=cache)
    runio.save_run(result, out_dir)
    if result.valid:
        _write_summary(result, [], out_dir)
    else:
        _eprint("warning: no valid sentences; skipping summary")
    _eprint(
        f"run complete: {result.counts['valid']}/{result.counts['pairs']} valid, "
        f"{result.counts['enumerations']} enumerations, "
        f"{result.counts['candidates']} candidates -> {out_dir}"
    )
    return 0


def cmd_validate(args) -> int:
    raw, base = load_config_file(args.config)
    config = build_run_config(raw, base, args)
    corpus = load_corpus(raw, base)
    if not config.backend:
        raise ConfigError("config needs a [backend] table or --backend override")
    backend = build_backend(config.backend)
    out_dir = Path(args.out)
    with open_cache(raw, base, out_dir) as cache:
        scored = pipeline._translate_and_score(corpus, backend, cache, config)
    valid = [s for s in scored if s.bleu.value >= config.valid_threshold]
    result = pipeline.RunResult(
        config=config,
        backend_spec=backend.spec_dict(),
        backend_fingerprint=backend.fingerprint(),
        metric_policy=pipeline.metric_policy(config),
        corpus_size=len(corpus),
        corpus_mean_bleu=mean_bleu([s.bleu for s in scored]),
        valid=valid,
        enumerations=[],
        candidates=[],
        created_at=datetime.now(timezone.utc).isoformat(),
    )
    runio.save_run(result, out_dir)
    _eprint(f"validate: {len(valid)}/{len(corpus)} valid -> {out_dir}")
    return 0


def cmd_enumerate(args) -> int:
    run_dir = Path(args.run)
    result = runio.load_run(run_dir)
    groups = pipeline.generate_enumerations(result.valid, result.config)
    with open(run_dir / DELETIONS_FILE, "w", encoding="utf-8") as fh:
        for group in groups:
            for deletion in group.deletions:
                record = {
                    "pair_id": deletion.pair_id,
                    "unit": deletion.unit.value,
                    "position": deletion.position,
                    "deleted_surface": deletion.deleted_surface,
                    "span_start": deletion.span_start,
                    "span_end": deletion.span_end,
                    "duplicate_of": deletion.duplicate_of,
                    "perturbed_text": deletion.perturbed_text,
                }
                fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    total = sum(len(g.deletions) for g in groups)
    _eprint(f"enumerate: {total} deletions over {len(groups)} valid sentences")
    return 0


def cmd_extract(args) -> int:
    run_dir = Path(args.run)
    result = runio.load_run(run_dir)
    config = result.config
    if not config.backend:
        raise ConfigError(f"{run_dir}/config.json lacks a backend spec")
    backend = build_backend(config.backend)
    raw = {"cache": {"dir": args.cache_dir}} if args.cache_dir else {}
    groups = pipeline.generate_enumerations(result.valid, config)
    with open_cache(raw, run_dir, run_dir) as cache:
        enumerations = pipeline.score_enumerations(groups, backend, cache, config)
    candidates = pipeline.extract_candidates(enumerations, config)
    result.enumerations = enumerations
    result.candidates = candidates
    runio.save_run(result, run_dir)
    _write_summary(result, [], run_dir)
    _eprint(
        f"extract: {len(candidates)} candidates among {len(enumerations)} enumerations"
    )
    return 0


def cmd_curve(args) -> int:
    raw, base = load_config_file(args.config)
    config = build_run_config(raw, base, args)
    corpus = load_corpus(raw, base)
    if not config.backend:
        raise ConfigError("config needs a [backend] table or --backend override")
    backend = build_backend(config.backend)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open_cache(raw, base, out_dir) as cache:
        valid = pipeline.find_valid(corpus, backend, cache, config)
        curve = analysis.decline_curve(
            valid, backend, cache, config, k_max=args.k_max, samples_per_k=args.samples
        )
    (out_dir / "curve.csv").write_text(analysis.curve_to_csv(curve), encoding="utf-8")
    payload = {
        "curve": curve.to_dict(),
        "config": config.to_dict(),
        "backend_fingerprint": backend.fingerprint(),
    }
    with open(out_dir / "curve.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
    if args.svg:
        (out_dir / "curve.svg").write_text(
            analysis.render_curve_svg(curve), encoding="utf-8"
        )
    _eprint(f"curve: {len(curve.points)} points, {len(curve.skipped_pair_ids)} skipped")
    return 0


def _load_annotations(path: str) -> list[annotation.Annotation]:
    with annotation.AnnotationStore(path, readonly=True) as store:
        return list(store.current().values())


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    result = runio.load_run(run_dir)
    records = _load_annotations(args.annotations) if args.annotations else []
    out_dir = Path(args.out) if args.out else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_summary(result, records, out_dir)
    _eprint(f"report -> {out_dir / SUMMARY_MD}")
    return 0


def cmd_serve(args) -> int:
    run_dir = Path(args.run)
    result = runio.load_run(run_dir)
    store = annotation.AnnotationStore(
        args.annotations, known_candidate_ids={c.candidate_id for c in result.candidates}
    )
    handle = service.serve(store, result, args.addr, static_dir=args.ui_dir)
    _eprint(f"serving triage API on http://{handle.address}/ (Ctrl-C to stop)")
    try:
        handle.wait()
    except KeyboardInterrupt:
        _eprint("shutting down")
    finally:
        handle.shutdown()
        store.close()
    return 0


def cmd_export(args) -> int:
    with annotation.AnnotationStore(args.annotations, readonly=True) as store:
        data = store.export_bytes()
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
    return 0


def _add_override_args(parser, with_out=True):
    parser.add_argument("--config", required=True, help="TOML config file")
    if with_out:
        parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--unit", choices=["char", "word"])
    parser.add_argument("--valid-threshold", type=float, dest="valid_threshold")
    parser.add_argument("--candidate-threshold", type=float, dest="candidate_threshold")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--backend", help="inline backend spec as JSON, overrides config")
    parser.add_argument("--lexicon", help="lexicon file for word segmentation")
    parser.add_argument("--label", help="model label used in reports")
    parser.add_argument(
        "--metric-tokenization", choices=["auto", "char", "word"], dest="metric_tokenization"
    )
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--max-workers", type=int, dest="max_workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probe",
        description="Find rare severe translation errors induced by minimal deletions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="full pipeline: validate, enumerate, extract")
    _add_override_args(run_p)
    run_p.set_defaults(fn=cmd_run)

    validate_p = sub.add_parser("validate", help="stage 1: filter valid sentences")
    _add_override_args(validate_p)
    validate_p.set_defaults(fn=cmd_validate)

    enum_p = sub.add_parser("enumerate", help="stage 2: emit deletion records")
    enum_p.add_argument("--run", required=True, help="run directory from validate")
    enum_p.set_defaults(fn=cmd_enumerate)

    extract_p = sub.add_parser("extract", help="stage 3: translate and flag candidates")
    extract_p.add_argument("--run", required=True, help="run directory from validate")
    extract_p.add_argument("--cache-dir", dest="cache_dir")
    extract_p.set_defaults(fn=cmd_extract)

    curve_p = sub.add_parser("curve", help="mean BLEU against deleted-unit count")
    _add_override_args(curve_p)
    curve_p.add_argument("--k-max", type=int, default=5, dest="k_max")
    curve_p.add_argument("--samples", type=int, default=3, help="samples per sentence per k")
    curve_p.add_argument("--svg", action="store_true", help="also render curve.svg")
    curve_p.set_defaults(fn=cmd_curve)

    report_p = sub.add_parser("report", help="summary table from a run and annotations")
    report_p.add_argument("--run", required=True)
    report_p.add_argument("--annotations")
    report_p.add_argument("--out")
    report_p.set_defaults(fn=cmd_report)

    serve_p = sub.add_parser("serve", help="host the triage API and UI")
    serve_p.add_argument("--run", required=True)
    serve_p.add_argument("--annotations", required=True)
    serve_p.add_argument("--addr", default="127.0.0.1:8787")
    serve_p.add_argument("--ui-dir", dest="ui_dir", help="static UI assets to serve at /")
    serve_p.set_defaults(fn=cmd_serve)

    export_p = sub.add_parser("export", help="dump the annotation log")
    export_p.add_argument("--annotations", required=True)
    export_p.add_argument("--out")
    export_p.set_defaults(fn=cmd_export)
    return parser


def dispatch(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        _eprint(f"config error: {exc}")
        return 2
    except FileNotFoundError as exc:
        _eprint(f"config error: {exc}")
        return 2
    except ProbeError as exc:
        _eprint(f"error: {type(exc).__name__}: {exc}")
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
