"""Candidate extraction pipeline: filter valid, enumerate, re-translate, flag.

Three sequential stages. First every test translation is scored and those at
or above the validity threshold survive. Each valid source is then perturbed
once per unit. Finally every distinct perturbed string is translated (through
the cache) and scored against the parent's original reference; enumerations
whose score falls to or below the candidate threshold become severe-error
candidates. Output ordering follows (corpus order, unit position) no matter
how translation batches are scheduled.
"""

from __future__ import annotations

import hashlib
import tempfile
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import Sequence

from . import metric, text_units
from .errors import ConfigError, EmptyCorpus, ProbeError, StageFailure, UnsegmentableInput
from .metric import BleuScore, MetricTokenization
from .text_units import Deletion, ExternalSegmenter, Lexicon, UnitKind
from .translator import Backend, TranslationCache, build_backend, translate_cached


@dataclass(frozen=True)
class TestPair:
    """One source/reference sentence pair, the unit of probing."""

    __test__ = False  # keep pytest from collecting this as a test class

    pair_id: str
    source_text: str
    reference_text: str

    def __post_init__(self):
        if not self.pair_id or not self.source_text or not self.reference_text:
            raise ConfigError(f"test pair {self.pair_id!r} has empty fields")


@dataclass
class RunConfig:
    """Effective settings of one probing run; echoed into every output."""

    unit: UnitKind = UnitKind.CHARACTER
    valid_threshold: float = 0.5
    candidate_threshold: float = 0.1
    metric_tokenization: MetricTokenization | None = None
    max_ngram_order: int = metric.DEFAULT_MAX_ORDER
    backend: dict | None = None
    lexicon_path: str | None = None
    segmenter_cmd: tuple[str, ...] | None = None
    seed: int = 0
    exclude_separator_units: bool = False
    batch_size: int | None = None
    max_workers: int = 1
    label: str = ""

    def __post_init__(self):
        if not 0.0 <= self.candidate_threshold < self.valid_threshold <= 1.0:
            raise ConfigError(
                "thresholds must satisfy 0 <= candidate_threshold < valid_threshold <= 1, "
                f"got candidate={self.candidate_threshold} valid={self.valid_threshold}"
            )
        if not 1 <= self.max_ngram_order <= 4:
            raise ConfigError("max_ngram_order must be in 1..4")

    def load_lexicon(self) -> Lexicon | None:
        return Lexicon.from_file(self.lexicon_path) if self.lexicon_path else None

    def word_segmenter(self) -> ExternalSegmenter | None:
        return ExternalSegmenter(self.segmenter_cmd) if self.segmenter_cmd else None

    def to_dict(self) -> dict:
        return {
            "unit": self.unit.value,
            "valid_threshold": self.valid_threshold,
            "candidate_threshold": self.candidate_threshold,
            "metric_tokenization": (
                self.metric_tokenization.value if self.metric_tokenization else "auto"
            ),
            "max_ngram_order": self.max_ngram_order,
            "backend": self.backend,
            "lexicon_path": self.lexicon_path,
            "segmenter_cmd": list(self.segmenter_cmd) if self.segmenter_cmd else None,
            "seed": self.seed,
            "exclude_separator_units": self.exclude_separator_units,
            "batch_size": self.batch_size,
            "max_workers": self.max_workers,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        scheme = raw.get("metric_tokenization", "auto")
        segmenter = raw.get("segmenter_cmd")
        return cls(
            unit=UnitKind(raw.get("unit", "char")),
            valid_threshold=float(raw.get("valid_threshold", 0.5)),
            candidate_threshold=float(raw.get("candidate_threshold", 0.1)),
            metric_tokenization=None if scheme in (None, "auto") else MetricTokenization(scheme),
            max_ngram_order=int(raw.get("max_ngram_order", metric.DEFAULT_MAX_ORDER)),
            backend=raw.get("backend"),
            lexicon_path=raw.get("lexicon_path"),
            segmenter_cmd=tuple(segmenter) if segmenter else None,
            seed=int(raw.get("seed", 0)),
            exclude_separator_units=bool(raw.get("exclude_separator_units", False)),
            batch_size=raw.get("batch_size"),
            max_workers=int(raw.get("max_workers", 1)),
            label=raw.get("label", ""),
        )


@dataclass
class ValidSentence:
    pair: TestPair
    translation: str
    bleu: BleuScore


@dataclass
class DeletionGroup:
    """All minimal deletions of one valid sentence, untranslated."""

    parent: ValidSentence
    deletions: list[Deletion]


@dataclass
class Enumeration:
    """One perturbed source, its translation, and its score."""

    deletion: Deletion
    translation: str
    bleu: BleuScore
    baseline_bleu: float

    @property
    def delta(self) -> float:
        return self.baseline_bleu - self.bleu.value


TRIAGE_UNLABELED = "unlabeled"
TRIAGE_LABELED = "labeled"


def candidate_id_for(pair_id: str, unit: UnitKind, position: int) -> str:
    raw = f"{pair_id}\x00{unit.value}\x00{position}".encode("utf-8")
    return hashlib.sha256(raw).hexdigest()[:16]


@dataclass
class Candidate:
    """An enumeration whose score collapsed below the candidate threshold."""

    enumeration: Enumeration
    delta: float
    candidate_id: str
    triage_status: str = TRIAGE_UNLABELED


@dataclass
class RunResult:
    """Self-describing output of one run; serialized by mtprobe.runio."""

    config: RunConfig
    backend_spec: dict
    backend_fingerprint: str
    metric_policy: dict
    corpus_size: int
    corpus_mean_bleu: float
    valid: list[ValidSentence]
    enumerations: list[Enumeration]
    candidates: list[Candidate]
    created_at: str = ""

    @property
    def counts(self) -> dict:
        return {
            "pairs": self.corpus_size,
            "valid": len(self.valid),
            "enumerations": len(self.enumerations),
            "candidates": len(self.candidates),
        }


def _score(translation: str, reference: str, config: RunConfig) -> BleuScore:
    return metric.score_sentence(
        translation, reference, config.metric_tokenization, config.max_ngram_order
    )


def metric_policy(config: RunConfig) -> dict:
    return {
        "tokenization": (
            config.metric_tokenization.value if config.metric_tokenization else "auto"
        ),
        "max_ngram_order": config.max_ngram_order,
        "smoothing": metric.SMOOTHING_POLICY,
    }


def _translate_and_score(
    corpus: Sequence[TestPair],
    backend: Backend,
    cache: TranslationCache,
    config: RunConfig,
) -> list[ValidSentence]:
    translations = translate_cached(
        backend,
        cache,
        [pair.source_text for pair in corpus],
        batch_size=config.batch_size,
        max_workers=config.max_workers,
    )
    return [
        ValidSentence(pair, translation, _score(translation, pair.reference_text, config))
        for pair, translation in zip(corpus, translations)
    ]


def find_valid(
    corpus: Sequence[TestPair],
    backend: Backend,
    cache: TranslationCache,
    config: RunConfig,
) -> list[ValidSentence]:
    """Translate every source once and keep pairs scoring at or above threshold."""
    if not corpus:
        raise EmptyCorpus("corpus is empty")
    scored = _translate_and_score(corpus, backend, cache, config)
    return [s for s in scored if s.bleu.value >= config.valid_threshold]


def generate_enumerations(
    valid: Sequence[ValidSentence], config: RunConfig
) -> list[DeletionGroup]:
    """Enumerate every single-unit deletion of every valid source."""
    if not valid:
        raise EmptyCorpus("no valid sentences to enumerate")
    lexicon = config.load_lexicon()
    segmenter = config.word_segmenter()
    groups = []
    for sentence in valid:
        pair = sentence.pair
        try:
            spans = None
            if segmenter is not None and config.unit is UnitKind.WORD:
                spans = segmenter.segment(pair.source_text)
            deletions = text_units.enumerate_deletions(
                pair.pair_id,
                pair.source_text,
                config.unit,
                lexicon,
                exclude_separators=config.exclude_separator_units,
                spans=spans,
            )
        except UnsegmentableInput as exc:
            raise UnsegmentableInput(f"pair {pair.pair_id!r}: {exc}") from exc
        groups.append(DeletionGroup(parent=sentence, deletions=deletions))
    return groups


def score_enumerations(
    groups: Sequence[DeletionGroup],
    backend: Backend,
    cache: TranslationCache,
    config: RunConfig,
) -> list[Enumeration]:
    """Translate every distinct perturbed string and score each enumeration.

    Duplicated perturbed strings share one translation call but keep separate
    records; each is scored against its own parent's original reference.
    """
    perturbed = [d.perturbed_text for g in groups for d in g.deletions]
    if not perturbed:
        return []
    translations = translate_cached(
        backend, cache, perturbed, batch_size=config.batch_size, max_workers=config.max_workers
    )
    enumerations = []
    cursor = 0
    for group in groups:
        reference = group.parent.pair.reference_text
        baseline = group.parent.bleu.value
        for deletion in group.deletions:
            translation = translations[cursor]
            cursor += 1
            enumerations.append(
                Enumeration(
                    deletion=deletion,
                    translation=translation,
                    bleu=_score(translation, reference, config),
                    baseline_bleu=baseline,
                )
            )
    return enumerations


def extract_candidates(
    enumerations: Sequence[Enumeration], config: RunConfig
) -> list[Candidate]:
    return [
        Candidate(
            enumeration=e,
            delta=e.delta,
            candidate_id=candidate_id_for(
                e.deletion.pair_id, e.deletion.unit, e.deletion.position
            ),
        )
        for e in enumerations
        if e.bleu.value <= config.candidate_threshold
    ]


def find_candidates(
    groups: Sequence[DeletionGroup],
    backend: Backend,
    cache: TranslationCache,
    config: RunConfig,
) -> list[Candidate]:
    return extract_candidates(score_enumerations(groups, backend, cache, config), config)


def run(
    corpus: Sequence[TestPair],
    config: RunConfig,
    backend: Backend | None = None,
    cache: TranslationCache | None = None,
) -> RunResult:
    """Compose the three stages into one self-describing result."""
    if backend is None:
        if not config.backend:
            raise ConfigError("run needs a backend object or a config backend spec")
        backend = build_backend(config.backend)
    if cache is None:
        # Ephemeral cache: still deduplicates within the run.
        scratch = tempfile.TemporaryDirectory(prefix="mtprobe-cache-")
        cache = TranslationCache(f"{scratch.name}/translations.bin")
        cache._scratch = scratch  # pin the tempdir to the cache's lifetime

    if not corpus:
        raise StageFailure("find_valid", EmptyCorpus("corpus is empty"))
    seen = set()
    for pair in corpus:
        if pair.pair_id in seen:
            raise StageFailure(
                "find_valid", ConfigError(f"duplicate pair_id {pair.pair_id!r} in corpus")
            )
        seen.add(pair.pair_id)

    def stage(name, fn, *args):
        try:
            return fn(*args)
        except ProbeError as exc:
            raise StageFailure(name, exc) from exc

    scored = stage("find_valid", _translate_and_score, corpus, backend, cache, config)
    valid = [s for s in scored if s.bleu.value >= config.valid_threshold]
    if valid:
        groups = stage("generate_enumerations", generate_enumerations, valid, config)
        enumerations = stage(
            "find_candidates", score_enumerations, groups, backend, cache, config
        )
        candidates = extract_candidates(enumerations, config)
    else:
        enumerations, candidates = [], []

    echoed = config
    if config.backend is None:
        echoed = replace(config, backend=backend.spec_dict())
    return RunResult(
        config=echoed,
        backend_spec=backend.spec_dict(),
        backend_fingerprint=backend.fingerprint(),
        metric_policy=metric_policy(config),
        corpus_size=len(corpus),
        corpus_mean_bleu=metric.mean_bleu([s.bleu for s in scored]),
        valid=valid,
        enumerations=enumerations,
        candidates=candidates,
        created_at=datetime.now(timezone.utc).isoformat(),
    )
