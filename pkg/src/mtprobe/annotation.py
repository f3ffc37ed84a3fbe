"""Persistent human-triage store and aggregate error statistics.

Labels live in an append-only JSONL log compacted in memory on load: the
record with the highest revision per candidate wins, so replaying a log
(or applying it twice) always reproduces the same current state. Every
acknowledged write is flushed and fsynced before the call returns.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import StoreLocked, UnknownCandidate
from .pipeline import RunResult

try:
    import fcntl
except ImportError:  # non-POSIX: single-writer discipline is on the operator
    fcntl = None


class ErrorCategory(Enum):
    WORD_CHANGING = "word_changing"
    INABILITY = "inability"
    MISSING_PARTS = "missing_parts"
    IRRELEVANT = "irrelevant"


SEVERE_CATEGORIES = (
    ErrorCategory.INABILITY,
    ErrorCategory.MISSING_PARTS,
    ErrorCategory.IRRELEVANT,
)

CATEGORY_WIRE_NAMES = [c.value for c in ErrorCategory]


def is_severe(category: ErrorCategory) -> bool:
    """Word changing is not considered severe; the other three are."""
    return category is not ErrorCategory.WORD_CHANGING


@dataclass(frozen=True)
class Annotation:
    """One triage verdict; later revisions supersede earlier ones."""

    candidate_id: str
    category: ErrorCategory
    annotator: str
    note: str | None
    timestamp: str
    revision: int

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "category": self.category.value,
            "annotator": self.annotator,
            "note": self.note,
            "timestamp": self.timestamp,
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Annotation":
        return cls(
            candidate_id=raw["candidate_id"],
            category=ErrorCategory(raw["category"]),
            annotator=raw.get("annotator", ""),
            note=raw.get("note"),
            timestamp=raw.get("timestamp", ""),
            revision=int(raw.get("revision", 1)),
        )


def compact(records: Iterable[Annotation]) -> dict[str, Annotation]:
    """Reduce a record stream to its current state (highest revision wins)."""
    current: dict[str, Annotation] = {}
    for record in records:
        existing = current.get(record.candidate_id)
        if existing is None or record.revision >= existing.revision:
            current[record.candidate_id] = record
    return current


class AnnotationStore:
    """Single-writer, multi-reader annotation log.

    A writer store holds an exclusive lock on the log file for its lifetime;
    a second writer gets StoreLocked. Open with readonly=True to inspect a
    log (e.g. for reports) without locking.
    """

    def __init__(
        self,
        path: str | Path,
        known_candidate_ids: Iterable[str] | None = None,
        readonly: bool = False,
    ):
        self.path = Path(path)
        self.readonly = readonly
        self.known_ids = set(known_candidate_ids) if known_candidate_ids is not None else None
        self._mutex = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._current = compact(self._read_log())
        self._fh = None
        if not readonly:
            self._fh = open(self.path, "a", encoding="utf-8")
            if fcntl is not None:
                try:
                    fcntl.flock(self._fh.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
                except OSError as exc:
                    self._fh.close()
                    raise StoreLocked(f"another writer holds {self.path}") from exc

    def _read_log(self) -> list[Annotation]:
        if not self.path.exists():
            return []
        records = []
        lines = self.path.read_text(encoding="utf-8").splitlines()
        for i, line in enumerate(lines):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(Annotation.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError):
                if i == len(lines) - 1:
                    break  # partial final line from a crashed writer
                raise
        return records

    def current(self) -> dict[str, Annotation]:
        with self._mutex:
            return dict(self._current)

    def current_for(self, candidate_id: str) -> Annotation | None:
        with self._mutex:
            return self._current.get(candidate_id)

    def record_label(
        self,
        candidate_id: str,
        category: ErrorCategory | str,
        annotator: str,
        note: str | None = None,
    ) -> Annotation:
        """Append a label; durable (flushed and fsynced) before returning."""
        if self.readonly or self._fh is None:
            raise StoreLocked(f"{self.path} was opened read-only")
        category = ErrorCategory(category)
        if self.known_ids is not None and candidate_id not in self.known_ids:
            raise UnknownCandidate(f"candidate {candidate_id!r} is not part of this run")
        with self._mutex:
            existing = self._current.get(candidate_id)
            record = Annotation(
                candidate_id=candidate_id,
                category=category,
                annotator=annotator,
                note=note,
                timestamp=datetime.now(timezone.utc).isoformat(),
                revision=(existing.revision + 1) if existing else 1,
            )
            self._fh.write(json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._current[candidate_id] = record
        return record

    def export_bytes(self) -> bytes:
        """The raw log, full revision history included."""
        return self.path.read_bytes() if self.path.exists() else b""

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "AnnotationStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


@dataclass(frozen=True)
class ErrorStats:
    """Current label counts over one run's candidates."""

    categories: dict
    severe_total: int
    severe_rate: float
    labeled: int
    unlabeled: int
    candidates: int
    enumerations: int

    def to_dict(self) -> dict:
        return {
            "categories": dict(self.categories),
            "severe_total": self.severe_total,
            "severe_rate": self.severe_rate,
            "severe_rate_display": format_rate(self.severe_rate),
            "labeled": self.labeled,
            "unlabeled": self.unlabeled,
            "candidates": self.candidates,
            "enumerations": self.enumerations,
        }


def format_rate(rate: float) -> str:
    """Rate as a percentage: two decimals, three below 0.01%."""
    pct = rate * 100.0
    return f"{pct:.3f}%" if 0 < pct < 0.01 else f"{pct:.2f}%"


def error_stats(store: AnnotationStore, run_result: RunResult) -> ErrorStats:
    """Count current annotations only; supersession has already collapsed
    re-labels, so every candidate contributes at most once."""
    run_ids = {c.candidate_id for c in run_result.candidates}
    counts = {c.value: 0 for c in ErrorCategory}
    labeled = 0
    for candidate_id, record in store.current().items():
        if candidate_id not in run_ids:
            continue
        counts[record.category.value] += 1
        labeled += 1
    severe_total = sum(counts[c.value] for c in SEVERE_CATEGORIES)
    enumerations = len(run_result.enumerations) or run_result.counts.get("enumerations", 0)
    return ErrorStats(
        categories=counts,
        severe_total=severe_total,
        severe_rate=(severe_total / enumerations) if enumerations else 0.0,
        labeled=labeled,
        unlabeled=len(run_ids) - labeled,
        candidates=len(run_ids),
        enumerations=enumerations,
    )
