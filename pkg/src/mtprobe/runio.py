"""On-disk formats: corpus input and the run output directory.

A run directory holds config.json (effective config, backend fingerprint,
metric policy, counts), valid.jsonl, enumerations.jsonl and candidates.jsonl.
All JSON is UTF-8 with sorted keys, so deterministic inputs give byte-identical
files; the only nondeterministic field is config.json's created_at.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError
from .metric import BleuScore
from .pipeline import (
    Candidate,
    Enumeration,
    RunConfig,
    RunResult,
    TestPair,
    TRIAGE_UNLABELED,
    ValidSentence,
)
from .text_units import Deletion, UnitKind

SCHEMA_VERSION = 1

CONFIG_FILE = "config.json"
VALID_FILE = "valid.jsonl"
ENUMERATIONS_FILE = "enumerations.jsonl"
CANDIDATES_FILE = "candidates.jsonl"


def load_corpus_tsv(path: str | Path) -> list[TestPair]:
    """TSV corpus: 'source<TAB>reference' or 'id<TAB>source<TAB>reference'."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            columns = line.split("\t")
            if len(columns) == 2:
                pairs.append(TestPair(f"{line_no:06d}", columns[0], columns[1]))
            elif len(columns) == 3:
                pairs.append(TestPair(columns[0], columns[1], columns[2]))
            else:
                raise ConfigError(f"{path}:{line_no}: expected 2 or 3 tab-separated columns")
    _check_unique_ids(pairs, path)
    return pairs


def load_corpus_aligned(source_path: str | Path, reference_path: str | Path) -> list[TestPair]:
    """Two aligned plain-text files, one sentence per line."""
    sources = Path(source_path).read_text(encoding="utf-8").splitlines()
    references = Path(reference_path).read_text(encoding="utf-8").splitlines()
    if len(sources) != len(references):
        raise ConfigError(
            f"aligned corpus length mismatch: {len(sources)} source lines, "
            f"{len(references)} reference lines"
        )
    pairs = [
        TestPair(f"{i:06d}", src, ref)
        for i, (src, ref) in enumerate(zip(sources, references), start=1)
        if src or ref
    ]
    _check_unique_ids(pairs, source_path)
    return pairs


def _check_unique_ids(pairs: Sequence[TestPair], origin) -> None:
    seen = set()
    for pair in pairs:
        if pair.pair_id in seen:
            raise ConfigError(f"{origin}: duplicate pair_id {pair.pair_id!r}")
        seen.add(pair.pair_id)


def _dump(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n"


def _bleu_fields(score: BleuScore) -> dict:
    return {
        "bleu": score.value,
        "precisions": list(score.precisions),
        "brevity_penalty": score.brevity_penalty,
        "candidate_len": score.candidate_len,
        "reference_len": score.reference_len,
    }


def _bleu_from(record: dict) -> BleuScore:
    return BleuScore(
        value=record["bleu"],
        precisions=tuple(record["precisions"]),
        brevity_penalty=record["brevity_penalty"],
        candidate_len=record["candidate_len"],
        reference_len=record["reference_len"],
    )


def valid_record(sentence: ValidSentence) -> dict:
    return {
        "pair_id": sentence.pair.pair_id,
        "source": sentence.pair.source_text,
        "reference": sentence.pair.reference_text,
        "translation": sentence.translation,
        **_bleu_fields(sentence.bleu),
    }


def enumeration_record(enum: Enumeration, is_candidate: bool) -> dict:
    deletion = enum.deletion
    return {
        "pair_id": deletion.pair_id,
        "unit": deletion.unit.value,
        "position": deletion.position,
        "deleted_surface": deletion.deleted_surface,
        "span_start": deletion.span_start,
        "span_end": deletion.span_end,
        "duplicate_of": deletion.duplicate_of,
        "perturbed_text": deletion.perturbed_text,
        "translation": enum.translation,
        "baseline_bleu": enum.baseline_bleu,
        "delta": enum.delta,
        "is_candidate": is_candidate,
        **_bleu_fields(enum.bleu),
    }


def candidate_record(candidate: Candidate) -> dict:
    record = enumeration_record(candidate.enumeration, True)
    record["candidate_id"] = candidate.candidate_id
    record["triage_status"] = candidate.triage_status
    return record


def header_record(result: RunResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "created_at": result.created_at,
        "config": result.config.to_dict(),
        "backend_spec": result.backend_spec,
        "backend_fingerprint": result.backend_fingerprint,
        "metric_policy": result.metric_policy,
        "counts": result.counts,
        "corpus_mean_bleu": result.corpus_mean_bleu,
    }


def save_run(result: RunResult, out_dir: str | Path) -> Path:
    """Write the run directory; files stream record by record."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def deletion_key(enum: Enumeration):
        d = enum.deletion
        return (d.pair_id, d.unit, d.position)

    flagged = {deletion_key(c.enumeration) for c in result.candidates}
    with open(out / CONFIG_FILE, "w", encoding="utf-8") as fh:
        json.dump(header_record(result), fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
    with open(out / VALID_FILE, "w", encoding="utf-8") as fh:
        for sentence in result.valid:
            fh.write(_dump(valid_record(sentence)))
    with open(out / ENUMERATIONS_FILE, "w", encoding="utf-8") as fh:
        for enum in result.enumerations:
            fh.write(_dump(enumeration_record(enum, deletion_key(enum) in flagged)))
    with open(out / CANDIDATES_FILE, "w", encoding="utf-8") as fh:
        for candidate in result.candidates:
            fh.write(_dump(candidate_record(candidate)))
    return out


def _read_jsonl(path: Path) -> Iterable[dict]:
    if not path.exists():
        return
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def load_run(run_dir: str | Path) -> RunResult:
    """Reconstruct a RunResult from a run directory."""
    run_dir = Path(run_dir)
    header_path = run_dir / CONFIG_FILE
    if not header_path.exists():
        raise ConfigError(f"{run_dir} is not a run directory (missing {CONFIG_FILE})")
    header = json.loads(header_path.read_text(encoding="utf-8"))

    valid = []
    for record in _read_jsonl(run_dir / VALID_FILE):
        valid.append(
            ValidSentence(
                pair=TestPair(record["pair_id"], record["source"], record["reference"]),
                translation=record["translation"],
                bleu=_bleu_from(record),
            )
        )

    def enum_from(record: dict) -> Enumeration:
        return Enumeration(
            deletion=Deletion(
                pair_id=record["pair_id"],
                unit=UnitKind(record["unit"]),
                position=record["position"],
                deleted_surface=record["deleted_surface"],
                perturbed_text=record["perturbed_text"],
                span_start=record["span_start"],
                span_end=record["span_end"],
                duplicate_of=record.get("duplicate_of"),
            ),
            translation=record["translation"],
            bleu=_bleu_from(record),
            baseline_bleu=record["baseline_bleu"],
        )

    enumerations = [enum_from(r) for r in _read_jsonl(run_dir / ENUMERATIONS_FILE)]
    candidates = [
        Candidate(
            enumeration=enum_from(record),
            delta=record["delta"],
            candidate_id=record["candidate_id"],
            triage_status=record.get("triage_status", TRIAGE_UNLABELED),
        )
        for record in _read_jsonl(run_dir / CANDIDATES_FILE)
    ]

    counts = header.get("counts", {})
    return RunResult(
        config=RunConfig.from_dict(header.get("config", {})),
        backend_spec=header.get("backend_spec", {}),
        backend_fingerprint=header.get("backend_fingerprint", ""),
        metric_policy=header.get("metric_policy", {}),
        corpus_size=counts.get("pairs", len(valid)),
        corpus_mean_bleu=header.get("corpus_mean_bleu", 0.0),
        valid=valid,
        enumerations=enumerations,
        candidates=candidates,
        created_at=header.get("created_at", ""),
    )
