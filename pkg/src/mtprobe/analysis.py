"""Aggregate statistics: ΔBLEU, summary tables, and decline curves.

Summary rows follow the shape of the extraction-results table: per-model
corpus BLEU, valid and enumeration counts with their mean BLEU, the absolute
and relative decline, and per-category severe-error counts. Display rounding
is half-away-from-zero; full precision is retained everywhere internally.
"""

from __future__ import annotations

import logging
import math
import random
import statistics
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

from . import text_units
from .annotation import Annotation, ErrorCategory, compact, format_rate, is_severe
from .errors import EmptyInput, ForeignAnnotation, SentenceTooShort
from .metric import mean_bleu
from .pipeline import RunConfig, RunResult, ValidSentence, _score
from .translator import Backend, TranslationCache, translate_cached

log = logging.getLogger(__name__)

Z_95 = 1.96


def round_half_away(value: float, decimals: int) -> float:
    exponent = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(value)).quantize(exponent, rounding=ROUND_HALF_UP))


def format_signed_pct(fraction: float) -> str:
    """A fraction as a signed percentage with one decimal, e.g. -14.3%."""
    return f"{round_half_away(fraction * 100.0, 1):+.1f}%"


def delta_bleu(
    valid_scores: Sequence[float], enum_scores: Sequence[float]
) -> tuple[float, float]:
    """Absolute and relative mean-BLEU decline (negative when quality drops)."""
    if not valid_scores or not enum_scores:
        raise EmptyInput("delta_bleu needs non-empty score lists")
    valid_mean = mean_bleu(valid_scores)
    enum_mean = mean_bleu(enum_scores)
    delta_abs = enum_mean - valid_mean
    return delta_abs, delta_abs / valid_mean


@dataclass(frozen=True)
class SummaryRow:
    """One extraction-summary row; arithmetic invariants are recomputable
    from the raw counts it carries."""

    label: str
    corpus_bleu: float
    unit: str
    valid_count: int
    valid_mean_bleu: float
    enum_count: int
    enum_mean_bleu: float
    delta_abs: float
    delta_pct: float
    inability: int
    missing_parts: int
    irrelevant: int
    word_changing: int
    unlabeled: int
    severe_total: int
    severe_rate: float

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "corpus_bleu": self.corpus_bleu,
            "unit": self.unit,
            "valid_count": self.valid_count,
            "valid_mean_bleu": self.valid_mean_bleu,
            "enum_count": self.enum_count,
            "enum_mean_bleu": self.enum_mean_bleu,
            "delta_abs": self.delta_abs,
            "delta_pct": self.delta_pct,
            "delta_display": (
                f"{round_half_away(self.delta_abs, 2):+.2f} ({format_signed_pct(self.delta_pct)})"
            ),
            "inability": self.inability,
            "missing_parts": self.missing_parts,
            "irrelevant": self.irrelevant,
            "word_changing": self.word_changing,
            "unlabeled": self.unlabeled,
            "severe_total": self.severe_total,
            "severe_rate": self.severe_rate,
            "severe_display": f"{self.severe_total} ({format_rate(self.severe_rate)})",
        }


def summarize(run_result: RunResult, annotations: Iterable[Annotation]) -> SummaryRow:
    """Assemble the summary row for one run and its current annotations.

    Severe errors are inability, missing parts and irrelevant; labeled
    word-changing candidates are reported separately and never inferred
    from the unlabeled remainder.
    """
    run_ids = {c.candidate_id for c in run_result.candidates}
    current = compact(annotations)
    for candidate_id in current:
        if candidate_id not in run_ids:
            raise ForeignAnnotation(f"annotation for unknown candidate {candidate_id!r}")
    counts = {category: 0 for category in ErrorCategory}
    for record in current.values():
        counts[record.category] += 1
    severe_total = sum(n for category, n in counts.items() if is_severe(category))

    if not run_result.valid:
        raise EmptyInput("run has no valid sentences to summarize")
    valid_mean = mean_bleu([v.bleu for v in run_result.valid])
    enum_count = len(run_result.enumerations)
    if run_result.enumerations:
        delta_abs, delta_pct = delta_bleu(
            [v.bleu.value for v in run_result.valid],
            [e.bleu.value for e in run_result.enumerations],
        )
        enum_mean = valid_mean + delta_abs
    else:
        delta_abs = delta_pct = enum_mean = 0.0

    return SummaryRow(
        label=run_result.config.label,
        corpus_bleu=run_result.corpus_mean_bleu,
        unit=run_result.config.unit.value,
        valid_count=len(run_result.valid),
        valid_mean_bleu=valid_mean,
        enum_count=enum_count,
        enum_mean_bleu=enum_mean,
        delta_abs=delta_abs,
        delta_pct=delta_pct,
        inability=counts[ErrorCategory.INABILITY],
        missing_parts=counts[ErrorCategory.MISSING_PARTS],
        irrelevant=counts[ErrorCategory.IRRELEVANT],
        word_changing=counts[ErrorCategory.WORD_CHANGING],
        unlabeled=len(run_ids) - len(current),
        severe_total=severe_total,
        severe_rate=(severe_total / enum_count) if enum_count else 0.0,
    )


_SUMMARY_COLUMNS = [
    ("Model", "label"),
    ("BLEU", "corpus_bleu"),
    ("Deletion", "unit"),
    ("Valid", "valid_count"),
    ("BLEU (valid)", "valid_mean_bleu"),
    ("Enum.", "enum_count"),
    ("BLEU (enum.)", "enum_mean_bleu"),
    ("ΔBLEU", "delta_display"),
    ("Inability", "inability"),
    ("Missing parts", "missing_parts"),
    ("Irrelevant", "irrelevant"),
    ("Severe", "severe_display"),
    ("Word changing", "word_changing"),
    ("Unlabeled", "unlabeled"),
]


def render_summary_markdown(rows: Sequence[SummaryRow]) -> str:
    def cell(value) -> str:
        if isinstance(value, float):
            return f"{round_half_away(value, 2):.2f}"
        return str(value)

    lines = [
        "| " + " | ".join(name for name, _ in _SUMMARY_COLUMNS) + " |",
        "| " + " | ".join("---" for _ in _SUMMARY_COLUMNS) + " |",
    ]
    for row in rows:
        data = row.to_dict()
        lines.append("| " + " | ".join(cell(data[key]) for _, key in _SUMMARY_COLUMNS) + " |")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DeclinePoint:
    k: int
    mean_bleu: float
    ci_low: float
    ci_high: float
    sample_count: int

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "mean_bleu": self.mean_bleu,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n": self.sample_count,
        }


@dataclass
class DeclineCurve:
    """Mean BLEU against the number of deleted units, with 95% CIs."""

    points: list[DeclinePoint]
    skipped_pair_ids: list[str]
    k_max: int
    samples_per_k: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "points": [p.to_dict() for p in self.points],
            "skipped_pair_ids": self.skipped_pair_ids,
            "k_max": self.k_max,
            "samples_per_k": self.samples_per_k,
            "seed": self.seed,
        }


def decline_curve(
    valid: Sequence[ValidSentence],
    backend: Backend,
    cache: TranslationCache,
    config: RunConfig,
    k_max: int = 5,
    samples_per_k: int = 3,
    seed: int | None = None,
) -> DeclineCurve:
    """Score uniformly sampled joint deletions of k units for k = 0..k_max.

    k positions are drawn without replacement from the original segmentation
    and removed jointly. Sentences with too few units for k_max are skipped
    (with a warning) and recorded; k = 0 is the unperturbed baseline. The CI
    is the normal approximation mean +/- 1.96 sd / sqrt(n).
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    seed = config.seed if seed is None else seed
    lexicon = config.load_lexicon()
    usable, skipped = [], []
    unit_counts = {}
    for sentence in valid:
        count = len(
            text_units.segment(
                sentence.pair.source_text,
                config.unit,
                lexicon,
                config.exclude_separator_units,
            )
        )
        if count > k_max:
            usable.append(sentence)
            unit_counts[sentence.pair.pair_id] = count
        else:
            skipped.append(sentence.pair.pair_id)
            log.warning(
                "decline curve: skipping %r (%d units <= k_max=%d)",
                sentence.pair.pair_id,
                count,
                k_max,
            )
    if not usable:
        raise SentenceTooShort(f"no sentence has more than k_max={k_max} units")

    rng = random.Random(seed)
    tasks = []  # (k, sentence, perturbed text), in deterministic order
    for k in range(k_max + 1):
        for sentence in usable:
            source = sentence.pair.source_text
            for _ in range(samples_per_k):
                if k == 0:
                    tasks.append((k, sentence, source))
                    continue
                positions = rng.sample(range(unit_counts[sentence.pair.pair_id]), k)
                perturbed = text_units.delete_many(
                    source, config.unit, positions, lexicon, config.exclude_separator_units
                )
                tasks.append((k, sentence, perturbed))

    translations = translate_cached(
        backend,
        cache,
        [text for _, _, text in tasks],
        batch_size=config.batch_size,
        max_workers=config.max_workers,
    )
    by_k: dict[int, list[float]] = {k: [] for k in range(k_max + 1)}
    for (k, sentence, _), translation in zip(tasks, translations):
        score = _score(translation, sentence.pair.reference_text, config)
        by_k[k].append(score.value)

    points = []
    for k in range(k_max + 1):
        scores = by_k[k]
        mean = statistics.fmean(scores)
        sd = statistics.stdev(scores) if len(scores) > 1 else 0.0
        half_width = Z_95 * sd / math.sqrt(len(scores))
        points.append(
            DeclinePoint(
                k=k,
                mean_bleu=mean,
                ci_low=mean - half_width,
                ci_high=mean + half_width,
                sample_count=len(scores),
            )
        )
    return DeclineCurve(
        points=points,
        skipped_pair_ids=skipped,
        k_max=k_max,
        samples_per_k=samples_per_k,
        seed=seed,
    )


def curve_to_csv(curve: DeclineCurve) -> str:
    lines = ["k,mean_bleu,ci_low,ci_high,n"]
    for p in curve.points:
        lines.append(f"{p.k},{p.mean_bleu!r},{p.ci_low!r},{p.ci_high!r},{p.sample_count}")
    return "\n".join(lines) + "\n"


def render_curve_svg(curve: DeclineCurve, width: int = 640, height: int = 400) -> str:
    """A minimal static line chart with a shaded confidence band."""
    pad = 50
    points = curve.points
    xs = [p.k for p in points]
    lows = [p.ci_low for p in points]
    highs = [p.ci_high for p in points]
    y_min = min(0.0, min(lows))
    y_max = max(1.0, max(highs))

    def sx(k: float) -> float:
        span = max(xs) - min(xs) or 1
        return pad + (k - min(xs)) / span * (width - 2 * pad)

    def sy(v: float) -> float:
        span = y_max - y_min or 1
        return height - pad - (v - y_min) / span * (height - 2 * pad)

    band = " ".join(f"{sx(p.k):.1f},{sy(p.ci_high):.1f}" for p in points)
    band += " " + " ".join(f"{sx(p.k):.1f},{sy(p.ci_low):.1f}" for p in reversed(points))
    line = " ".join(f"{sx(p.k):.1f},{sy(p.mean_bleu):.1f}" for p in points)
    ticks = []
    for p in points:
        ticks.append(
            f'<text x="{sx(p.k):.1f}" y="{height - pad + 18}" text-anchor="middle" '
            f'font-size="11">{p.k}</text>'
        )
    for value in (0.0, 0.25, 0.5, 0.75, 1.0):
        if y_min <= value <= y_max:
            ticks.append(
                f'<text x="{pad - 8}" y="{sy(value):.1f}" text-anchor="end" '
                f'font-size="11" dominant-baseline="middle">{value:.2f}</text>'
            )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
        f'<rect width="{width}" height="{height}" fill="white"/>'
        f'<polygon points="{band}" fill="#aac8e8" fill-opacity="0.5"/>'
        f'<polyline points="{line}" fill="none" stroke="#1f4e8c" stroke-width="2"/>'
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>'
        f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle" font-size="12">'
        "units deleted</text>"
        f'<text x="16" y="{height / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {height / 2:.0f})">mean sentence BLEU</text>'
        + "".join(ticks)
        + "</svg>\n"
    )
