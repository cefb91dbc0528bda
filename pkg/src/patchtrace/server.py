"""HTTP service over the report store: reports, networks, reviews, traces.

Endpoints (JSON bodies):

  GET  /api/reports                     list report summaries
  GET  /api/reports/<cve>               full trace report
  GET  /api/reports/<cve>/network       structured network export
  POST /api/reports/<cve>/review        {patch_id, verdict, note?, reviewer?}
  POST /api/trace                       {cve_id} -> queued trace request
  GET  /api/trace/<cve>                 queue state for a requested trace

Trace requests are queued and executed one at a time with the store's
persisted run configuration. Review posts resolve last-writer-wins with a
full audit trail. When a static directory is configured, anything outside
/api/ is served from it (single-page-app fallback to index.html).
"""

from __future__ import annotations

import json
import mimetypes
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .errors import PatchTraceError, UnknownReportError
from .models import validate_cve_id
from .report import ReportStore, export_graph, run_trace


class TraceQueue:
    """Single-worker trace queue with per-CVE state tracking."""

    def __init__(self, store: ReportStore) -> None:
        self.store = store
        self.states: dict[str, dict] = {}
        self._queue: queue.Queue[str | None] = queue.Queue()
        self._lock = threading.Lock()
        self._worker = threading.Thread(target=self._run, daemon=True)
        self._worker.start()

    def enqueue(self, cve_id: str) -> dict:
        cve_id = validate_cve_id(cve_id)
        with self._lock:
            state = self.states.get(cve_id)
            if state and state["state"] in ("queued", "running"):
                return state
            state = {"cve_id": cve_id, "state": "queued"}
            self.states[cve_id] = state
        self._queue.put(cve_id)
        return state

    def state_of(self, cve_id: str) -> dict:
        with self._lock:
            return dict(self.states.get(cve_id, {"cve_id": cve_id, "state": "unknown"}))

    def _run(self) -> None:
        while True:
            cve_id = self._queue.get()
            if cve_id is None:
                return
            with self._lock:
                self.states[cve_id]["state"] = "running"
            try:
                config = self.store.load_run_config()
                run_trace(cve_id, config, self.store)
            except Exception as exc:
                with self._lock:
                    self.states[cve_id] = {
                        "cve_id": cve_id,
                        "state": "failed",
                        "error": str(exc),
                    }
            else:
                with self._lock:
                    self.states[cve_id] = {"cve_id": cve_id, "state": "done"}

    def stop(self) -> None:
        self._queue.put(None)
        self._worker.join(timeout=5)


class ReviewService:
    def __init__(self, store_dir: Path | str, ui_dir: Path | str | None = None) -> None:
        self.store = ReportStore(store_dir)
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.traces = TraceQueue(self.store)


class _Handler(BaseHTTPRequestHandler):
    server_version = "patchtrace/0.1"
    service: ReviewService  # injected by make_server

    def log_message(self, format: str, *args) -> None:  # noqa: A002 - stdlib name
        pass

    def _send_json(self, status: int, payload: dict | list) -> None:
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_text(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", "0"))
        if not length:
            return {}
        try:
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            return {}
        return payload if isinstance(payload, dict) else {}

    def do_OPTIONS(self) -> None:  # CORS preflight
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self) -> None:
        path = self.path.split("?", 1)[0].rstrip("/") or "/"
        service = self.service
        try:
            if path == "/api/reports":
                self._send_json(200, {"reports": service.store.list_reports()})
                return
            if path.startswith("/api/reports/"):
                rest = path[len("/api/reports/") :]
                if rest.endswith("/network"):
                    cve_id = rest[: -len("/network")]
                    report = service.store.load(validate_cve_id(cve_id))
                    self._send_text(
                        200,
                        export_graph(report, "structured").encode("utf-8"),
                        "application/json",
                    )
                    return
                report = service.store.load(validate_cve_id(rest))
                self._send_json(200, report.to_dict())
                return
            if path.startswith("/api/trace/"):
                cve_id = path[len("/api/trace/") :]
                self._send_json(200, service.traces.state_of(validate_cve_id(cve_id)))
                return
        except UnknownReportError:
            self._send_json(404, {"error": "report not found"})
            return
        except PatchTraceError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        if not path.startswith("/api/") and service.ui_dir:
            self._serve_static(path)
            return
        self._send_json(404, {"error": "no such endpoint"})

    def _serve_static(self, path: str) -> None:
        base = self.service.ui_dir.resolve()
        relative = path.lstrip("/") or "index.html"
        target = (base / relative).resolve()
        if base not in target.parents and target != base:
            self._send_json(404, {"error": "not found"})
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            target = base / "index.html"  # SPA fallback
            if not target.is_file():
                self._send_json(404, {"error": "not found"})
                return
        content_type = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self._send_text(200, target.read_bytes(), content_type)

    def do_POST(self) -> None:
        path = self.path.split("?", 1)[0].rstrip("/")
        service = self.service
        body = self._read_body()
        try:
            if path == "/api/trace":
                cve_id = validate_cve_id(str(body.get("cve_id", "")))
                state = service.traces.enqueue(cve_id)
                self._send_json(202, state)
                return
            if path.startswith("/api/reports/") and path.endswith("/review"):
                cve_id = validate_cve_id(
                    path[len("/api/reports/") : -len("/review")]
                )
                decision = service.store.apply_review(
                    cve_id,
                    patch_id=str(body.get("patch_id", "")),
                    verdict=str(body.get("verdict", "")),
                    note=str(body.get("note", "")),
                    reviewer=str(body.get("reviewer", "")),
                )
                self._send_json(200, {"ok": True, "review": decision})
                return
        except UnknownReportError as exc:
            self._send_json(404, {"error": str(exc)})
            return
        except (PatchTraceError, ValueError) as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self._send_json(404, {"error": "no such endpoint"})


class PatchTraceServer(ThreadingHTTPServer):
    daemon_threads = True
    service: ReviewService

    def shutdown_service(self) -> None:
        self.service.traces.stop()
        self.shutdown()


def serve(
    store_dir: Path | str,
    bind_address: tuple[str, int] = ("127.0.0.1", 8330),
    ui_dir: Path | str | None = None,
) -> PatchTraceServer:
    """Create the HTTP server (call serve_forever() to block)."""
    service = ReviewService(store_dir, ui_dir=ui_dir)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = PatchTraceServer(bind_address, handler)
    server.service = service
    return server
