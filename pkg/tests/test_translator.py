import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from mtprobe.errors import (
    BackendUnavailable,
    ConfigError,
    MissingTranslation,
    ProtocolViolation,
)
from mtprobe.translator import (
    HttpBackend,
    MockBehavior,
    MockDictionaryBackend,
    MockRule,
    PrecomputedFileBackend,
    SubprocessBackend,
    build_backend,
    translate_batch,
)


class TestMockDictionary:
    def test_token_mapping(self):
        backend = MockDictionaryBackend({"perro": "dog", "grande": "big"})
        assert translate_batch(backend, ["perro grande"]) == ["dog big"]

    def test_unknown_tokens_pass_through(self):
        backend = MockDictionaryBackend({"perro": "dog"})
        assert translate_batch(backend, ["perro ladra"]) == ["dog ladra"]

    def test_empty_mapping_is_identity(self):
        backend = MockDictionaryBackend()
        assert translate_batch(backend, ["the cat sat"]) == ["the cat sat"]

    def test_absence_rule_fires_fixed_output(self):
        rule = MockRule(
            behavior=MockBehavior.FIXED_OUTPUT,
            contains="occupational",
            lacks="health",
            output="UN peacekeeping funding",
        )
        backend = MockDictionaryBackend(rules=[rule])
        assert translate_batch(backend, ["occupational heath and risks"]) == [
            "UN peacekeeping funding"
        ]
        # With the token present the rule stays quiet.
        assert translate_batch(backend, ["occupational health and risks"]) == [
            "occupational health and risks"
        ]

    def test_copy_source_ignores_mapping(self):
        rule = MockRule(behavior=MockBehavior.COPY_SOURCE, contains="trigger")
        backend = MockDictionaryBackend({"trigger": "翻译"}, rules=[rule])
        assert translate_batch(backend, ["trigger word"]) == ["trigger word"]

    def test_truncate_half_translates_leading_source_tokens(self):
        rule = MockRule(behavior=MockBehavior.TRUNCATE_HALF, contains="x")
        backend = MockDictionaryBackend({"a": "A", "b": "B", "c": "C"}, rules=[rule])
        assert translate_batch(backend, ["a b c x"]) == ["A B"]
        assert translate_batch(backend, ["a x"]) == ["A"]

    def test_first_match_wins(self):
        rules = [
            MockRule(behavior=MockBehavior.FIXED_OUTPUT, contains="t", output="first"),
            MockRule(behavior=MockBehavior.FIXED_OUTPUT, contains="t", output="second"),
        ]
        backend = MockDictionaryBackend(rules=rules)
        assert translate_batch(backend, ["t"]) == ["first"]

    def test_from_file(self, tmp_path):
        spec = {
            "map": {"hola": "hello"},
            "rules": [{"behavior": "copy_source", "contains": "raw"}],
        }
        path = tmp_path / "mock.json"
        path.write_text(json.dumps(spec), encoding="utf-8")
        backend = MockDictionaryBackend.from_file(path)
        assert translate_batch(backend, ["hola", "raw hola"]) == ["hello", "raw hola"]

    def test_bad_rule_rejected(self):
        with pytest.raises(ConfigError):
            MockRule.from_dict({"behavior": "hallucinate"})


class TestBatchContract:
    def test_empty_sources_rejected(self):
        with pytest.raises(ValueError):
            translate_batch(MockDictionaryBackend(), [])

    def test_multiline_source_rejected(self):
        with pytest.raises(ValueError):
            translate_batch(MockDictionaryBackend(), ["two\nlines"])


ECHO_CHILD = "import sys\nfor line in sys.stdin:\n    sys.stdout.write(line)\n"
DROP_LAST_CHILD = (
    "import sys\n"
    "lines = sys.stdin.readlines()\n"
    "for line in lines[:-1]:\n"
    "    sys.stdout.write(line)\n"
)


class TestSubprocessBackend:
    def test_line_for_line(self):
        backend = SubprocessBackend([sys.executable, "-c", ECHO_CHILD])
        assert translate_batch(backend, ["uno", "dos", "tres"]) == ["uno", "dos", "tres"]

    def test_line_count_mismatch(self):
        backend = SubprocessBackend([sys.executable, "-c", DROP_LAST_CHILD])
        with pytest.raises(ProtocolViolation):
            translate_batch(backend, ["a", "b", "c"])

    def test_process_failure(self):
        backend = SubprocessBackend([sys.executable, "-c", "import sys; sys.exit(2)"])
        with pytest.raises(BackendUnavailable):
            translate_batch(backend, ["a"])

    def test_missing_binary(self):
        backend = SubprocessBackend(["/nonexistent/translator"])
        with pytest.raises(BackendUnavailable):
            translate_batch(backend, ["a"])


class _FlakyService(BaseHTTPRequestHandler):
    failures_left = 0

    def do_POST(self):
        cls = type(self)
        if cls.failures_left > 0:
            cls.failures_left -= 1
            self.send_error(503)
            return
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        payload = json.dumps(
            {"translations": [s.upper() for s in body["sources"]]}
        ).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_service():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _FlakyService)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/translate"
    server.shutdown()


class TestHttpBackend:
    def test_round_trip(self, http_service):
        _FlakyService.failures_left = 0
        backend = HttpBackend(http_service, backoff=0.01)
        assert translate_batch(backend, ["ab", "cd"]) == ["AB", "CD"]

    def test_retries_transient_failures(self, http_service):
        _FlakyService.failures_left = 2
        backend = HttpBackend(http_service, backoff=0.01)
        assert translate_batch(backend, ["ok"]) == ["OK"]

    def test_gives_up_after_max_attempts(self, http_service):
        _FlakyService.failures_left = 99
        backend = HttpBackend(http_service, backoff=0.01)
        with pytest.raises(BackendUnavailable):
            translate_batch(backend, ["never"])
        # Three attempts consumed exactly.
        assert _FlakyService.failures_left == 96

    def test_unreachable_endpoint(self):
        backend = HttpBackend("http://127.0.0.1:1/translate", backoff=0.01)
        with pytest.raises(BackendUnavailable):
            translate_batch(backend, ["x"])


class TestPrecomputedFile:
    def test_lookup(self, tmp_path):
        path = tmp_path / "translations.tsv"
        path.write_text("hola\thello\nadios\tgoodbye\n", encoding="utf-8")
        backend = PrecomputedFileBackend(path)
        assert translate_batch(backend, ["adios", "hola"]) == ["goodbye", "hello"]

    def test_missing_source(self, tmp_path):
        path = tmp_path / "translations.tsv"
        path.write_text("hola\thello\n", encoding="utf-8")
        backend = PrecomputedFileBackend(path)
        with pytest.raises(MissingTranslation):
            translate_batch(backend, ["unknown"])

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "translations.tsv"
        path.write_text("no tab here\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            PrecomputedFileBackend(path)


class TestFingerprints:
    def test_any_parameter_change_alters_fingerprint(self, tmp_path):
        base = MockDictionaryBackend({"a": "b"})
        assert base.fingerprint() == MockDictionaryBackend({"a": "b"}).fingerprint()
        assert base.fingerprint() != MockDictionaryBackend({"a": "c"}).fingerprint()
        assert (
            base.fingerprint()
            != MockDictionaryBackend(
                {"a": "b"}, rules=[MockRule(behavior=MockBehavior.COPY_SOURCE)]
            ).fingerprint()
        )
        assert (
            HttpBackend("http://h/1").fingerprint() != HttpBackend("http://h/2").fingerprint()
        )
        assert (
            HttpBackend("http://h/1", timeout=5).fingerprint()
            != HttpBackend("http://h/1", timeout=9).fingerprint()
        )

    def test_file_backend_fingerprint_tracks_content(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("a\tb\n", encoding="utf-8")
        first = PrecomputedFileBackend(path).fingerprint()
        path.write_text("a\tc\n", encoding="utf-8")
        assert PrecomputedFileBackend(path).fingerprint() != first


class TestBuildBackend:
    def test_mock_inline(self):
        backend = build_backend({"kind": "mock", "map": {"x": "y"}})
        assert backend.translate_batch(["x"]) == ["y"]

    def test_file_kind(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("a\tb\n", encoding="utf-8")
        backend = build_backend({"kind": "file", "path": str(path)})
        assert backend.translate_batch(["a"]) == ["b"]

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            build_backend({"kind": "quantum"})

    def test_http_requires_url(self):
        with pytest.raises(ConfigError):
            build_backend({"kind": "http"})
