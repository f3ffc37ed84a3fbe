"""Translation backends behind one batch interface.

Every backend answers ``translate_batch`` positionally: translation i
belongs to source i, whatever happens inside. Backends also expose a
canonical spec dict whose hash keys the translation cache, so any parameter
change (including the content of files a backend reads) invalidates it.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from ..errors import BackendUnavailable, ConfigError, MissingTranslation, ProtocolViolation


def _canonical(spec: dict) -> str:
    return json.dumps(spec, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def _file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


class Backend:
    """Common fingerprinting; subclasses implement translate_batch."""

    kind = "abstract"

    def spec_dict(self) -> dict:
        raise NotImplementedError

    def fingerprint(self) -> str:
        return hashlib.sha256(_canonical(self.spec_dict()).encode("utf-8")).hexdigest()

    def translate_batch(self, sources: Sequence[str]) -> list[str]:
        raise NotImplementedError


def translate_batch(backend: Backend, sources: Sequence[str]) -> list[str]:
    """Translate sources, enforcing the positional batch contract."""
    if not sources:
        raise ValueError("sources must not be empty")
    for source in sources:
        if "\n" in source or "\r" in source:
            raise ValueError(f"source must be a single line: {source!r}")
    translations = backend.translate_batch(sources)
    if len(translations) != len(sources):
        raise ProtocolViolation(
            f"backend returned {len(translations)} translations for {len(sources)} sources"
        )
    return translations


class MockBehavior(Enum):
    MAP_TOKENS = "map_tokens"
    COPY_SOURCE = "copy_source"
    FIXED_OUTPUT = "fixed_output"
    TRUNCATE_HALF = "truncate_half"


@dataclass(frozen=True)
class MockRule:
    """One ordered rule of the mock translator; first match wins.

    ``contains`` requires a token present in the whitespace-split source,
    ``lacks`` requires a token absent. The behaviors reproduce the pathology
    shapes severe errors take: copying the source verbatim (inability),
    emitting a fixed unrelated sentence (irrelevant), and translating only
    the first half of the source tokens (missing parts).
    """

    behavior: MockBehavior
    contains: str | None = None
    lacks: str | None = None
    output: str | None = None

    def matches(self, tokens: Sequence[str]) -> bool:
        token_set = set(tokens)
        if self.contains is not None and self.contains not in token_set:
            return False
        if self.lacks is not None and self.lacks in token_set:
            return False
        return True

    def to_dict(self) -> dict:
        return {
            "behavior": self.behavior.value,
            "contains": self.contains,
            "lacks": self.lacks,
            "output": self.output,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "MockRule":
        try:
            behavior = MockBehavior(raw["behavior"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad mock rule behavior in {raw!r}") from exc
        return cls(
            behavior=behavior,
            contains=raw.get("contains"),
            lacks=raw.get("lacks"),
            output=raw.get("output"),
        )


class MockDictionaryBackend(Backend):
    """Deterministic token-mapping translator with plantable pathologies.

    This is the shipped desk-scale stand-in for a real translation model,
    not test-only code: an empty mapping makes it an identity translator,
    and rules plant severe-error shapes on chosen trigger conditions.
    """

    kind = "mock"

    def __init__(self, mapping: dict[str, str] | None = None, rules: Sequence[MockRule] = ()):
        self.mapping = dict(mapping or {})
        self.rules = tuple(rules)

    @classmethod
    def from_file(cls, path: str | Path) -> "MockDictionaryBackend":
        """Load a JSON file: {"map": {src: tgt, ...}, "rules": [rule, ...]}."""
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        rules = [MockRule.from_dict(r) for r in raw.get("rules", [])]
        return cls(mapping=raw.get("map", {}), rules=rules)

    def spec_dict(self) -> dict:
        return {
            "kind": self.kind,
            "map": self.mapping,
            "rules": [r.to_dict() for r in self.rules],
        }

    def _map_tokens(self, tokens: Sequence[str]) -> str:
        return " ".join(self.mapping.get(t, t) for t in tokens)

    def _translate_one(self, source: str) -> str:
        tokens = source.split()
        for rule in self.rules:
            if not rule.matches(tokens):
                continue
            if rule.behavior is MockBehavior.COPY_SOURCE:
                return source
            if rule.behavior is MockBehavior.FIXED_OUTPUT:
                return rule.output or ""
            if rule.behavior is MockBehavior.TRUNCATE_HALF:
                return self._map_tokens(tokens[: max(1, len(tokens) // 2)])
            return self._map_tokens(tokens)
        return self._map_tokens(tokens)

    def translate_batch(self, sources: Sequence[str]) -> list[str]:
        return [self._translate_one(s) for s in sources]


class SubprocessBackend(Backend):
    """Line-oriented child process: N lines in, N lines out, UTF-8."""

    kind = "subprocess"

    def __init__(self, command: Sequence[str]):
        if not command:
            raise ConfigError("subprocess backend needs a non-empty command")
        self.command = tuple(command)

    def spec_dict(self) -> dict:
        return {"kind": self.kind, "command": list(self.command)}

    def translate_batch(self, sources: Sequence[str]) -> list[str]:
        payload = "".join(s + "\n" for s in sources)
        try:
            proc = subprocess.run(
                self.command,
                input=payload.encode("utf-8"),
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                check=True,
            )
        except (OSError, subprocess.CalledProcessError) as exc:
            raise BackendUnavailable(f"translator {self.command[0]!r} failed: {exc}") from exc
        lines = proc.stdout.decode("utf-8").splitlines()
        if len(lines) != len(sources):
            raise ProtocolViolation(
                f"translator returned {len(lines)} lines for {len(sources)} sources"
            )
        return lines


class HttpBackend(Backend):
    """POST {"sources": [...]} to a service, expect {"translations": [...]}.

    Retries idempotently with exponential backoff, then gives up: long
    enumeration runs must survive transient faults.
    """

    kind = "http"
    max_attempts = 3

    def __init__(self, url: str, timeout: float = 30.0, backoff: float = 0.5):
        self.url = url
        self.timeout = timeout
        self.backoff = backoff

    def spec_dict(self) -> dict:
        return {"kind": self.kind, "url": self.url, "timeout": self.timeout}

    def _post(self, sources: Sequence[str]) -> list[str]:
        body = json.dumps({"sources": list(sources)}, ensure_ascii=False).encode("utf-8")
        request = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        with urllib.request.urlopen(request, timeout=self.timeout) as response:
            if response.status != 200:
                raise BackendUnavailable(f"service answered status {response.status}")
            payload = json.loads(response.read().decode("utf-8"))
        translations = payload.get("translations")
        if not isinstance(translations, list):
            raise ProtocolViolation("service response lacks a 'translations' list")
        return [str(t) for t in translations]

    def translate_batch(self, sources: Sequence[str]) -> list[str]:
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                return self._post(sources)
            except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
                last_error = exc
                if attempt + 1 < self.max_attempts:
                    time.sleep(self.backoff * (2**attempt))
        raise BackendUnavailable(
            f"service at {self.url} failed after {self.max_attempts} attempts: {last_error}"
        )


class PrecomputedFileBackend(Backend):
    """Translations from a UTF-8 TSV file, two columns: source, translation."""

    kind = "file"

    def __init__(self, path: str | Path):
        self.path = str(path)
        self._content_digest = _file_sha256(path)
        self._table: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if "\t" not in line:
                    raise ConfigError(f"{self.path}:{line_no}: expected source<TAB>translation")
                source, translation = line.split("\t", 1)
                self._table[source] = translation

    def spec_dict(self) -> dict:
        return {"kind": self.kind, "path": self.path, "content_sha256": self._content_digest}

    def translate_batch(self, sources: Sequence[str]) -> list[str]:
        missing = [s for s in sources if s not in self._table]
        if missing:
            raise MissingTranslation(
                f"{self.path} lacks {len(missing)} source(s), first: {missing[0]!r}"
            )
        return [self._table[s] for s in sources]


def build_backend(spec: dict) -> Backend:
    """Construct a backend from its declarative config form."""
    kind = spec.get("kind")
    if kind == "mock":
        if "mapping_file" in spec:
            backend = MockDictionaryBackend.from_file(spec["mapping_file"])
            if spec.get("map") or spec.get("rules"):
                raise ConfigError("mock backend: use mapping_file or inline map/rules, not both")
            return backend
        rules = [MockRule.from_dict(r) for r in spec.get("rules", [])]
        return MockDictionaryBackend(mapping=spec.get("map", {}), rules=rules)
    if kind == "subprocess":
        return SubprocessBackend(spec.get("command", ()))
    if kind == "http":
        if "url" not in spec:
            raise ConfigError("http backend needs a url")
        return HttpBackend(spec["url"], timeout=float(spec.get("timeout", 30.0)))
    if kind == "file":
        if "path" not in spec:
            raise ConfigError("file backend needs a path")
        return PrecomputedFileBackend(spec["path"])
    raise ConfigError(f"unknown backend kind: {kind!r}")
