"""Append-only persistent translation cache.

An enumerated corpus explodes 10-50x over the test set and is mostly made
of near-duplicate strings, so identical sources must never be re-translated,
within a run or across runs. Entries are keyed by a cryptographic hash of
(backend fingerprint, exact source string); no normalization happens before
hashing because a one-scalar difference must be a distinct key.

File format (documented bit-exactly; see also README):

    header   magic b"PRBC", version byte 0x01
    record   32-byte SHA-256 key
             u32 little-endian source length in Unicode scalar values
             u32 little-endian translation length in bytes
             translation, UTF-8

Records are only ever appended and flushed to disk before a store returns.
A truncated final record (crashed writer) is discarded on open; a bad magic
or version raises CacheCorrupt.
"""

from __future__ import annotations

import hashlib
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from ..errors import CacheCorrupt
from .backends import Backend, translate_batch

MAGIC = b"PRBC"
VERSION = 1
_LENGTHS = struct.Struct("<II")


def cache_key(fingerprint: str, source: str) -> bytes:
    return hashlib.sha256(
        fingerprint.encode("utf-8") + b"\x00" + source.encode("utf-8")
    ).digest()


class TranslationCache:
    """Durable map from (backend fingerprint, source) to translation."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[bytes, str] = {}
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists() and self.path.stat().st_size > 0:
            self._load()
        else:
            with open(self.path, "wb") as fh:
                fh.write(MAGIC + bytes([VERSION]))
        self._fh = open(self.path, "ab")

    def _load(self) -> None:
        with open(self.path, "rb") as fh:
            header = fh.read(len(MAGIC) + 1)
            if header[: len(MAGIC)] != MAGIC:
                raise CacheCorrupt(f"{self.path}: bad magic header")
            if header[len(MAGIC) :] != bytes([VERSION]):
                raise CacheCorrupt(f"{self.path}: unsupported cache version")
            good_offset = fh.tell()
            while True:
                key = fh.read(32)
                if not key:
                    break
                lengths = fh.read(_LENGTHS.size)
                if len(key) < 32 or len(lengths) < _LENGTHS.size:
                    break
                _, translation_len = _LENGTHS.unpack(lengths)
                translation = fh.read(translation_len)
                if len(translation) < translation_len:
                    break
                self._entries[key] = translation.decode("utf-8")
                good_offset = fh.tell()
        # Drop a partial record left by a crashed writer.
        with open(self.path, "r+b") as fh:
            fh.truncate(good_offset)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, fingerprint: str, source: str) -> str | None:
        return self._entries.get(cache_key(fingerprint, source))

    def put(self, fingerprint: str, source: str, translation: str) -> None:
        self.put_many(fingerprint, [(source, translation)])

    def put_many(self, fingerprint: str, pairs: Sequence[tuple[str, str]]) -> None:
        """Append entries and flush before returning (durable once stored)."""
        with self._lock:
            for source, translation in pairs:
                key = cache_key(fingerprint, source)
                encoded = translation.encode("utf-8")
                self._fh.write(key)
                self._fh.write(_LENGTHS.pack(len(source), len(encoded)))
                self._fh.write(encoded)
                self._entries[key] = translation
            self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "TranslationCache":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _chunked(items: list[str], size: int | None) -> list[list[str]]:
    if not size or size <= 0 or size >= len(items):
        return [items] if items else []
    return [items[i : i + size] for i in range(0, len(items), size)]


def translate_cached(
    backend: Backend,
    cache: TranslationCache,
    sources: Sequence[str],
    batch_size: int | None = None,
    max_workers: int = 1,
) -> list[str]:
    """Like translate_batch, but only cache misses reach the backend.

    Duplicate sources within one call hit the backend at most once. Miss
    batches may be dispatched concurrently; output is assembled positionally,
    so ordering is deterministic regardless of completion order.
    """
    if not sources:
        raise ValueError("sources must not be empty")
    fingerprint = backend.fingerprint()
    resolved: dict[str, str] = {}
    misses: list[str] = []
    for source in sources:
        if source in resolved or source in misses:
            continue
        hit = cache.get(fingerprint, source)
        if hit is None:
            misses.append(source)
        else:
            resolved[source] = hit

    def handle(chunk: list[str]) -> None:
        translations = translate_batch(backend, chunk)
        cache.put_many(fingerprint, list(zip(chunk, translations)))
        resolved.update(zip(chunk, translations))

    chunks = _chunked(misses, batch_size)
    if max_workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for future in [pool.submit(handle, c) for c in chunks]:
                future.result()
    else:
        for chunk in chunks:
            handle(chunk)
    return [resolved[source] for source in sources]
