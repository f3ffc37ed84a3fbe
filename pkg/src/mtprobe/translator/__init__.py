"""Batch translation over pluggable backends with a persistent cache."""

from .backends import (
    Backend,
    HttpBackend,
    MockBehavior,
    MockDictionaryBackend,
    MockRule,
    PrecomputedFileBackend,
    SubprocessBackend,
    build_backend,
    translate_batch,
)
from .cache import TranslationCache, translate_cached

__all__ = [
    "Backend",
    "HttpBackend",
    "MockBehavior",
    "MockDictionaryBackend",
    "MockRule",
    "PrecomputedFileBackend",
    "SubprocessBackend",
    "TranslationCache",
    "build_backend",
    "translate_batch",
    "translate_cached",
]
