"""HTTP API for candidate triage, plus static hosting for the review UI.

All endpoints are JSON over UTF-8. Candidates are served worst-BLEU-first
(triage looks at the lowest scorers), every mutation is durable in the
annotation log before its response is sent, and the closed four-category
taxonomy is enforced at the wire with a 422 listing the allowed values.

    GET  /api/run                     run header (config, fingerprint, counts)
    GET  /api/candidates              ?status=&category=&offset=&limit=
    GET  /api/candidates/{id}
    POST /api/candidates/{id}/label   {"category", "annotator", "note"?}
    GET  /api/stats
    GET  /api/export                  annotations.jsonl download
"""

from __future__ import annotations

import errno
import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .annotation import AnnotationStore, CATEGORY_WIRE_NAMES, error_stats
from .errors import AddressInUse, StoreLocked, UnknownCandidate
from .pipeline import Candidate, RunResult, TRIAGE_LABELED, TRIAGE_UNLABELED
from .runio import header_record

log = logging.getLogger(__name__)

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".svg": "image/svg+xml",
    ".json": "application/json",
    ".ico": "image/x-icon",
}


class TriageService:
    """Application state shared by all request handler threads."""

    def __init__(self, store: AnnotationStore, run_result: RunResult, static_dir=None):
        self.store = store
        self.run = run_result
        self.static_dir = Path(static_dir) if static_dir else None
        self._valid_by_pair = {v.pair.pair_id: v for v in run_result.valid}
        self._candidates = sorted(
            run_result.candidates,
            key=lambda c: (
                c.enumeration.bleu.value,
                c.enumeration.deletion.pair_id,
                c.enumeration.deletion.position,
            ),
        )
        self._by_id = {c.candidate_id: c for c in self._candidates}

    def _bleu_dict(self, score) -> dict:
        return {
            "value": score.value,
            "precisions": list(score.precisions),
            "brevity_penalty": score.brevity_penalty,
            "candidate_len": score.candidate_len,
            "reference_len": score.reference_len,
        }

    def candidate_view(self, candidate: Candidate) -> dict:
        enum = candidate.enumeration
        deletion = enum.deletion
        parent = self._valid_by_pair.get(deletion.pair_id)
        label = self.store.current_for(candidate.candidate_id)
        return {
            "candidate_id": candidate.candidate_id,
            "pair_id": deletion.pair_id,
            "source": parent.pair.source_text if parent else None,
            "reference": parent.pair.reference_text if parent else None,
            "perturbed_source": deletion.perturbed_text,
            "translation": enum.translation,
            "deleted": {
                "unit": deletion.unit.value,
                "position": deletion.position,
                "surface": deletion.deleted_surface,
                "span_start": deletion.span_start,
                "span_end": deletion.span_end,
            },
            "bleu": self._bleu_dict(enum.bleu),
            "baseline": {
                "translation": parent.translation if parent else None,
                "bleu": self._bleu_dict(parent.bleu) if parent else None,
            },
            "delta": candidate.delta,
            "triage_status": TRIAGE_LABELED if label else TRIAGE_UNLABELED,
            "label": label.to_dict() if label else None,
        }

    def list_candidates(self, status=None, category=None, offset=0, limit=50) -> dict:
        views = [self.candidate_view(c) for c in self._candidates]
        if status:
            views = [v for v in views if v["triage_status"] == status]
        if category:
            views = [v for v in views if v["label"] and v["label"]["category"] == category]
        total = len(views)
        page = views[offset : offset + limit if limit else None]
        return {"candidates": page, "total": total, "offset": offset, "limit": limit}

    def label(self, candidate_id: str, category: str, annotator: str, note=None) -> dict:
        if candidate_id not in self._by_id:
            raise UnknownCandidate(candidate_id)
        record = self.store.record_label(candidate_id, category, annotator, note)
        return {
            "annotation": record.to_dict(),
            "candidate": self.candidate_view(self._by_id[candidate_id]),
        }

    def stats(self) -> dict:
        return error_stats(self.store, self.run).to_dict()


class _Handler(BaseHTTPRequestHandler):
    service: TriageService  # injected by serve()

    def log_message(self, fmt, *args):
        log.debug("http: " + fmt, *args)

    def _send_json(self, payload, status=200):
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_bytes(self, body: bytes, content_type: str, status=200, download=None):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        if download:
            self.send_header("Content-Disposition", f'attachment; filename="{download}"')
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        service = self.service
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        if parts[:2] == ["api", "run"]:
            return self._send_json(header_record(service.run))
        if parts[:2] == ["api", "stats"]:
            return self._send_json(service.stats())
        if parts[:2] == ["api", "export"]:
            return self._send_bytes(
                service.store.export_bytes(),
                "application/x-ndjson; charset=utf-8",
                download="annotations.jsonl",
            )
        if parts[:2] == ["api", "candidates"]:
            if len(parts) == 2:
                query = parse_qs(url.query)

                def first(key, default=None):
                    return query.get(key, [default])[0]

                try:
                    offset = int(first("offset", "0"))
                    limit = int(first("limit", "50"))
                except ValueError:
                    return self._send_json({"error": "offset and limit must be integers"}, 400)
                status = first("status")
                if status and status not in (TRIAGE_LABELED, TRIAGE_UNLABELED):
                    return self._send_json(
                        {"error": f"unknown status {status!r}",
                         "allowed": [TRIAGE_UNLABELED, TRIAGE_LABELED]},
                        400,
                    )
                return self._send_json(
                    service.list_candidates(status, first("category"), offset, limit)
                )
            if len(parts) == 3:
                candidate = service._by_id.get(parts[2])
                if candidate is None:
                    return self._send_json({"error": f"unknown candidate {parts[2]!r}"}, 404)
                return self._send_json(service.candidate_view(candidate))
        if parts and parts[0] == "api":
            return self._send_json({"error": "not found"}, 404)
        return self._serve_static(url.path)

    def do_POST(self):
        service = self.service
        parts = [p for p in urlparse(self.path).path.split("/") if p]
        if len(parts) == 4 and parts[:2] == ["api", "candidates"] and parts[3] == "label":
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length) or b"{}")
            except (ValueError, json.JSONDecodeError):
                return self._send_json({"error": "request body must be JSON"}, 400)
            category = payload.get("category")
            if category not in CATEGORY_WIRE_NAMES:
                return self._send_json(
                    {
                        "error": f"unknown category {category!r}",
                        "allowed": CATEGORY_WIRE_NAMES,
                    },
                    422,
                )
            try:
                result = service.label(
                    parts[2],
                    category,
                    str(payload.get("annotator", "")),
                    payload.get("note"),
                )
            except UnknownCandidate:
                return self._send_json({"error": f"unknown candidate {parts[2]!r}"}, 404)
            except StoreLocked as exc:
                return self._send_json({"error": str(exc)}, 409)
            return self._send_json(result)
        return self._send_json({"error": "not found"}, 404)

    def _serve_static(self, path: str):
        root = self.service.static_dir
        if root is None:
            return self._send_json({"error": "no UI bundled; API lives under /api/"}, 404)
        name = path.lstrip("/") or "index.html"
        target = (root / name).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            return self._send_json({"error": "not found"}, 404)
        content_type = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        return self._send_bytes(target.read_bytes(), content_type)


class ServiceHandle:
    """A running service; shut down to release the port and flush the store."""

    def __init__(self, server: ThreadingHTTPServer, thread: threading.Thread, service):
        self._server = server
        self._thread = thread
        self.service = service
        host, port = server.server_address[:2]
        self.address = f"{host}:{port}"
        self.port = port

    def wait(self, poll_seconds: float = 1.0):
        while self._thread.is_alive():
            self._thread.join(poll_seconds)

    def shutdown(self):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def serve(
    store: AnnotationStore,
    run_result: RunResult,
    address: str = "127.0.0.1:0",
    static_dir=None,
) -> ServiceHandle:
    """Start the triage service on host:port (port 0 picks a free one)."""
    host, _, port = address.partition(":")
    service = TriageService(store, run_result, static_dir)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    try:
        server = ThreadingHTTPServer((host or "127.0.0.1", int(port or 0)), handler)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            raise AddressInUse(f"address {address} is already in use") from exc
        raise
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return ServiceHandle(server, thread, service)
