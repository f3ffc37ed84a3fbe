"""Sentence-level BLEU with a fixed, deterministic smoothing policy.

Smoothing: order 1 is unsmoothed (p1 = 0, including the empty candidate,
forces a score of 0); orders 2 and up use add-one on both numerator and
denominator, so a candidate too short to produce any n-gram of some order
gets p_n = 1 for that order instead of zeroing the whole score. Identity
therefore scores exactly 1.0. The policy is echoed in every report header.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import EmptyInput, EmptyReference

DEFAULT_MAX_ORDER = 4
SMOOTHING_POLICY = "p1-unsmoothed-add-one-higher-orders"

# Blocks that mark a reference as CJK for the default tokenization choice:
# Han (incl. extension A, compatibility, and the supplementary planes),
# hiragana/katakana, and hangul.
_CJK_RANGES = (
    (0x1100, 0x11FF),
    (0x3040, 0x30FF),
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xAC00, 0xD7AF),
    (0xF900, 0xFAFF),
    (0x20000, 0x2EBEF),
)


class MetricTokenization(Enum):
    CHARACTER_LEVEL = "char"
    WORD_LEVEL = "word"


@dataclass(frozen=True)
class BleuScore:
    """A sentence BLEU value with its decomposition."""

    value: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    candidate_len: int
    reference_len: int


def contains_cjk(text: str) -> bool:
    return any(lo <= ord(ch) <= hi for ch in text for lo, hi in _CJK_RANGES)


def choose_tokenization(
    reference: str, override: MetricTokenization | None = None
) -> MetricTokenization:
    """Default policy: character-level for CJK references, word-level otherwise."""
    if override is not None:
        return override
    if contains_cjk(reference):
        return MetricTokenization.CHARACTER_LEVEL
    return MetricTokenization.WORD_LEVEL


def metric_tokenize(text: str, scheme: MetricTokenization) -> list[str]:
    """Tokenize for scoring; separator scalars never become tokens."""
    if scheme is MetricTokenization.CHARACTER_LEVEL:
        return [ch for ch in text if not ch.isspace()]
    return text.split()


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    """Counts of every contiguous n-token window; empty when too short."""
    if n < 1:
        raise ValueError("n-gram order must be >= 1")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def sentence_bleu(
    candidate: Sequence[str],
    reference: Sequence[str],
    max_order: int = DEFAULT_MAX_ORDER,
) -> BleuScore:
    """Score one candidate against one reference.

    Modified n-gram precisions clip each candidate n-gram's count at its
    reference count. Brevity penalty is exp(1 - r/c) for short candidates.
    """
    if not reference:
        raise EmptyReference("reference token list must not be empty")
    if not 1 <= max_order <= 4:
        raise ValueError("max_order must be in 1..4")
    cand_len = len(candidate)
    ref_len = len(reference)
    precisions = []
    for n in range(1, max_order + 1):
        cand_counts = ngram_counts(candidate, n)
        total = sum(cand_counts.values())
        ref_counts = ngram_counts(reference, n)
        matched = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        if n == 1:
            precisions.append(matched / total if total else 0.0)
        else:
            precisions.append((matched + 1) / (total + 1))
    if cand_len == 0 or cand_len >= ref_len:
        brevity_penalty = 1.0
    else:
        brevity_penalty = math.exp(1.0 - ref_len / cand_len)
    if precisions[0] == 0.0:
        value = 0.0
    else:
        value = brevity_penalty * math.exp(
            sum(math.log(p) for p in precisions) / len(precisions)
        )
    return BleuScore(
        value=value,
        precisions=tuple(precisions),
        brevity_penalty=brevity_penalty,
        candidate_len=cand_len,
        reference_len=ref_len,
    )


def score_sentence(
    candidate_text: str,
    reference_text: str,
    tokenization: MetricTokenization | None = None,
    max_order: int = DEFAULT_MAX_ORDER,
) -> BleuScore:
    """Tokenize both sides under the reference's scheme and score."""
    scheme = choose_tokenization(reference_text, tokenization)
    return sentence_bleu(
        metric_tokenize(candidate_text, scheme),
        metric_tokenize(reference_text, scheme),
        max_order=max_order,
    )


def mean_bleu(scores: Sequence) -> float:
    """Arithmetic mean of BLEU values (accepts BleuScore objects or floats)."""
    if not scores:
        raise EmptyInput("cannot average an empty score list")
    values = [s.value if isinstance(s, BleuScore) else float(s) for s in scores]
    return sum(values) / len(values)
