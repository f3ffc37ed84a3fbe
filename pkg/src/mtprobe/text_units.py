"""Tokenization into deletable units and minimal-deletion perturbations.

A unit is either a single Unicode scalar value or a word. Word units come
from separator runs when the text contains any separator, and from greedy
longest-match against a lexicon when it does not (e.g. unspaced Chinese).
Every function here is pure; offsets are in Unicode scalar values.
"""

from __future__ import annotations

import subprocess
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BackendUnavailable, IndexOutOfRange, ProtocolViolation, UnsegmentableInput


class UnitKind(Enum):
    CHARACTER = "char"
    WORD = "word"


@dataclass(frozen=True)
class UnitSpan:
    """One deletable unit: its ordinal index and offsets in the original text."""

    index: int
    surface: str
    start: int
    end: int


@dataclass(frozen=True)
class Deletion:
    """Provenance record of one minimal perturbation.

    ``duplicate_of`` is the position of an earlier deletion of the same text
    that produced an identical perturbed string, or None. Duplicates are kept:
    error attribution needs every deletion position.
    """

    pair_id: str
    unit: UnitKind
    position: int
    deleted_surface: str
    perturbed_text: str
    span_start: int
    span_end: int
    duplicate_of: int | None = None


@dataclass(frozen=True)
class Lexicon:
    """Known words for greedy longest-match segmentation of unspaced text."""

    entries: frozenset[str]
    max_entry_len: int

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Lexicon":
        entries = frozenset(w for w in words if w)
        max_len = max((len(w) for w in entries), default=0)
        return cls(entries=entries, max_entry_len=max_len)

    @classmethod
    def from_file(cls, path: str | Path) -> "Lexicon":
        """Load a lexicon file: UTF-8, one word per line, '#' lines ignored."""
        words = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                word = line.strip()
                if word and not word.startswith("#"):
                    words.append(word)
        return cls.from_words(words)


def is_separator(ch: str) -> bool:
    return ch.isspace()


def _separator_runs_present(text: str) -> bool:
    return any(is_separator(ch) for ch in text)


def _segment_characters(text: str) -> list[UnitSpan]:
    return [UnitSpan(i, ch, i, i + 1) for i, ch in enumerate(text)]


def _segment_separator_words(text: str) -> list[UnitSpan]:
    """Maximal runs of non-separator scalars; separators are not units."""
    spans = []
    start = None
    for i, ch in enumerate(text):
        if is_separator(ch):
            if start is not None:
                spans.append(UnitSpan(len(spans), text[start:i], start, i))
                start = None
        elif start is None:
            start = i
    if start is not None:
        spans.append(UnitSpan(len(spans), text[start:], start, len(text)))
    return spans


def _segment_greedy(text: str, lexicon: Lexicon) -> list[UnitSpan]:
    """Greedy longest-match against the lexicon, single scalar on no match."""
    spans = []
    pos = 0
    n = len(text)
    while pos < n:
        length = 1
        for cand in range(min(lexicon.max_entry_len, n - pos), 1, -1):
            if text[pos : pos + cand] in lexicon.entries:
                length = cand
                break
        spans.append(UnitSpan(len(spans), text[pos : pos + length], pos, pos + length))
        pos += length
    return spans


def segment(
    text: str,
    unit: UnitKind,
    lexicon: Lexicon | None = None,
    exclude_separators: bool = False,
) -> list[UnitSpan]:
    """Split text into deletable units.

    Character kind yields one span per Unicode scalar value, whitespace and
    punctuation included (they are deletable). ``exclude_separators`` filters
    separator scalars out of the deletable set; it defaults off.

    Word kind uses separator runs when the text contains any separator, and
    greedy lexicon matching otherwise.
    """
    if unit is UnitKind.CHARACTER:
        spans = _segment_characters(text)
        if exclude_separators:
            kept = [s for s in spans if not is_separator(s.surface)]
            spans = [UnitSpan(i, s.surface, s.start, s.end) for i, s in enumerate(kept)]
        return spans
    if _separator_runs_present(text):
        return _segment_separator_words(text)
    if lexicon is None or not lexicon.entries:
        raise UnsegmentableInput(
            "word segmentation of unspaced text requires a lexicon or external segmenter"
        )
    return _segment_greedy(text, lexicon)


def _apply_deletion(text: str, unit: UnitKind, span: UnitSpan) -> str:
    """Remove one unit span, applying the word-kind separator cleanup.

    When both neighbors of a removed word are separator runs they collapse
    into one single separator; separators left at either end are trimmed.
    """
    if unit is UnitKind.CHARACTER:
        return text[: span.start] + text[span.end :]
    left_start = span.start
    while left_start > 0 and is_separator(text[left_start - 1]):
        left_start -= 1
    right_end = span.end
    while right_end < len(text) and is_separator(text[right_end]):
        right_end += 1
    left_run = text[left_start : span.start]
    right_run = text[span.end : right_end]
    joiner = left_run[0] if left_run and right_run else ""
    return text[:left_start] + joiner + text[right_end:]


def delete_at(
    text: str,
    unit: UnitKind,
    index: int,
    lexicon: Lexicon | None = None,
    pair_id: str = "",
    exclude_separators: bool = False,
) -> Deletion:
    """Delete the unit at ``index`` and record full provenance."""
    spans = segment(text, unit, lexicon, exclude_separators)
    if index >= len(spans) or index < 0:
        raise IndexOutOfRange(f"index {index} out of range for {len(spans)} units")
    span = spans[index]
    return Deletion(
        pair_id=pair_id,
        unit=unit,
        position=index,
        deleted_surface=span.surface,
        perturbed_text=_apply_deletion(text, unit, span),
        span_start=span.start,
        span_end=span.end,
    )


def enumerate_deletions(
    pair_id: str,
    text: str,
    unit: UnitKind,
    lexicon: Lexicon | None = None,
    exclude_separators: bool = False,
    spans: Sequence[UnitSpan] | None = None,
) -> list[Deletion]:
    """Produce one Deletion per unit index, in index order.

    Records whose perturbed text duplicates an earlier record are flagged via
    ``duplicate_of`` but retained; the translation layer deduplicates calls.
    ``spans`` lets a caller supply a precomputed (e.g. external) segmentation.
    """
    if not text:
        raise UnsegmentableInput("cannot enumerate deletions of empty text")
    if spans is None:
        spans = segment(text, unit, lexicon, exclude_separators)
    records = []
    first_seen: dict[str, int] = {}
    for span in spans:
        perturbed = _apply_deletion(text, unit, span)
        records.append(
            Deletion(
                pair_id=pair_id,
                unit=unit,
                position=span.index,
                deleted_surface=span.surface,
                perturbed_text=perturbed,
                span_start=span.start,
                span_end=span.end,
                duplicate_of=first_seen.get(perturbed),
            )
        )
        first_seen.setdefault(perturbed, span.index)
    return records


def delete_many(
    text: str,
    unit: UnitKind,
    indices: Iterable[int],
    lexicon: Lexicon | None = None,
    exclude_separators: bool = False,
) -> str:
    """Jointly remove several distinct unit positions of one segmentation.

    Used by the decline-curve analysis; the candidate pipeline itself only
    ever deletes a single unit. Positions refer to the original segmentation.
    """
    spans = segment(text, unit, lexicon, exclude_separators)
    wanted = sorted(set(indices), reverse=True)
    if wanted and wanted[0] >= len(spans):
        raise IndexOutOfRange(f"index {wanted[0]} out of range for {len(spans)} units")
    # Descending order keeps the remaining spans' offsets valid: each removal
    # only edits text at or after the end of every lower-indexed span.
    result = text
    for idx in wanted:
        result = _apply_deletion(result, unit, spans[idx])
    return result


def spans_from_units(text: str, units: Sequence[str]) -> list[UnitSpan]:
    """Align externally produced unit strings back onto the original text."""
    spans = []
    pos = 0
    for i, surface in enumerate(units):
        while pos < len(text) and is_separator(text[pos]):
            pos += 1
        if text[pos : pos + len(surface)] != surface:
            raise ProtocolViolation(
                f"segmenter unit {surface!r} does not match text at offset {pos}"
            )
        spans.append(UnitSpan(i, surface, pos, pos + len(surface)))
        pos += len(surface)
    return spans


class ExternalSegmenter:
    """Word segmentation via a child process.

    Protocol: one sentence per line on the child's standard input; the child
    writes the same number of lines with units separated by single spaces.
    """

    def __init__(self, command: Sequence[str]):
        if not command:
            raise ValueError("segmenter command must not be empty")
        self.command = tuple(command)

    def segment_batch(self, texts: Sequence[str]) -> list[list[UnitSpan]]:
        payload = "".join(t + "\n" for t in texts)
        try:
            proc = subprocess.run(
                self.command,
                input=payload.encode("utf-8"),
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                check=True,
            )
        except (OSError, subprocess.CalledProcessError) as exc:
            raise BackendUnavailable(f"segmenter {self.command[0]!r} failed: {exc}") from exc
        lines = proc.stdout.decode("utf-8").splitlines()
        if len(lines) != len(texts):
            raise ProtocolViolation(
                f"segmenter returned {len(lines)} lines for {len(texts)} sentences"
            )
        return [spans_from_units(text, line.split()) for text, line in zip(texts, lines)]

    def segment(self, text: str) -> list[UnitSpan]:
        return self.segment_batch([text])[0]
