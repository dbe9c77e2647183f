"""Label distribution service: crawl, classify, store, serve over HTTP.

Endpoints:

* ``GET /v1/labels?since=<unix_seconds>`` — newline-delimited JSON label
  snapshot, strictly newer than ``since``.
* ``POST /v1/classify`` — body ``{"url": ..., "source": <base64>?}``;
  classifies on demand (a cache hit is returned without refetching) and
  persists the result. Disabled unless miss classification is allowed.
* ``GET /v1/health`` — model version and store entry count.

The refresh loop re-crawls a page list, classifies every script it finds
and stores the labels; scripts whose content hash is unchanged since the
last run are skipped.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .corpus import content_hash, extract_inline_scripts, extract_script_urls
from .features import Vocabulary, builtin_catalog, extract_features, load_api_catalog
from .model import (
    DEFAULT_THRESHOLD,
    ModelParameters,
    assign_category,
    load_model,
)
from .store import LabelEntry, LabelStore, StoreConfig

log = logging.getLogger(__name__)

USER_AGENT = "slimweb-labeler/0.1"


class FetchError(RuntimeError):
    pass


class MissClassificationDisabled(RuntimeError):
    pass


def http_fetcher(
    url: str, connect_timeout: float = 10.0, total_timeout: float = 30.0
) -> bytes:
    """Fetch a URL with a wall-clock budget and a single retry."""
    last: Exception | None = None
    for attempt in range(2):
        try:
            request = urllib.request.Request(url, headers={"User-Agent": USER_AGENT})
            deadline = time.monotonic() + total_timeout
            with urllib.request.urlopen(request, timeout=connect_timeout) as resp:
                chunks = []
                while True:
                    if time.monotonic() > deadline:
                        raise FetchError(f"fetch of {url} exceeded "
                                         f"{total_timeout}s")
                    chunk = resp.read(65536)
                    if not chunk:
                        break
                    chunks.append(chunk)
                return b"".join(chunks)
        except FetchError:
            raise
        except Exception as exc:  # urllib raises a small zoo here
            last = exc
            if attempt == 0:
                continue
    raise FetchError(f"cannot fetch {url}: {last}")


def dir_fetcher(root: str | Path):
    """Fetcher that resolves URL paths under a directory (hermetic mode)."""
    root = Path(root)

    def fetch(url: str) -> bytes:
        path = urlparse(url).path.lstrip("/") or "index.html"
        target = (root / path).resolve()
        if root.resolve() not in target.parents and target != root.resolve():
            raise FetchError(f"{url} escapes the corpus directory")
        try:
            return target.read_bytes()
        except OSError as exc:
            raise FetchError(f"cannot fetch {url}: {exc}") from exc

    return fetch


@dataclass
class ServiceConfig:
    listen: tuple[str, int] = ("127.0.0.1", 8300)
    store_path: str | Path = "labels.db"
    model_path: str | Path = "model.json"
    vocab_path: str | Path | None = None  # None: bundled catalog
    page_list_path: str | Path | None = None
    refresh_period: float = 24 * 3600.0
    allow_miss_classification: bool = True
    threshold: float | None = None  # None: the model file's default

    def __post_init__(self) -> None:
        if self.refresh_period <= 0:
            raise ValueError("refresh_period must be positive")


@dataclass
class RefreshReport:
    pages: int = 0
    scripts_seen: int = 0
    newly_labeled: int = 0
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "pages": self.pages,
            "scripts_seen": self.scripts_seen,
            "newly_labeled": self.newly_labeled,
            "errors": self.errors,
        }


def read_page_list(path: str | Path) -> list[str]:
    """One URL per line; blank lines and ``#`` comments ignored."""
    pages = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            pages.append(line)
    return pages


class LabelService:
    """Shared state behind the HTTP endpoints and the refresh loop."""

    def __init__(
        self,
        store: LabelStore,
        model: ModelParameters,
        vocab: Vocabulary,
        threshold: float = DEFAULT_THRESHOLD,
        fetcher=http_fetcher,
        allow_miss_classification: bool = True,
        seen_hash_path: str | Path | None = None,
    ):
        if model.vocab_version and model.vocab_version != vocab.version:
            raise ValueError(
                f"model was trained on vocabulary {model.vocab_version}, "
                f"got {vocab.version}"
            )
        self.store = store
        self.model = model
        self.vocab = vocab
        self.threshold = threshold
        self.fetcher = fetcher
        self.allow_miss_classification = allow_miss_classification
        self._refresh_lock = threading.Lock()
        self._seen_hash_path = Path(seen_hash_path) if seen_hash_path else None
        self._seen_hashes: dict[str, str] = {}
        if self._seen_hash_path and self._seen_hash_path.exists():
            self._seen_hashes = json.loads(
                self._seen_hash_path.read_text(encoding="utf-8")
            )

    # -- classification plumbing

    def _label(self, key: str, domain: str, source: bytes) -> LabelEntry:
        vector = extract_features(source, self.vocab)
        result = assign_category(self.model, vector, self.threshold)
        entry = LabelEntry(
            key=key,
            domain=domain,
            category=result.category,
            confidence=result.confidence,
            labeled_at=int(time.time()),
        )
        self.store.put(entry)
        return entry

    def classify_remote(self, url: str, source: bytes | None = None) -> LabelEntry:
        """On-demand classification for label misses (consent-gated)."""
        if not self.allow_miss_classification:
            raise MissClassificationDisabled("miss classification disabled")
        cached = self.store.get(url)
        if cached is not None:
            return cached
        if source is None:
            source = self.fetcher(url)  # FetchError propagates, no mutation
        domain = urlparse(url).hostname or ""
        entry = self._label(url, domain.lower(), source)
        self._seen_hashes[url] = content_hash(source)
        return entry

    # -- refresh

    def refresh(self, pages: list[str]) -> RefreshReport:
        """Crawl pages, classify their scripts, store the labels.

        Refreshes are serialized with each other; per-URL failures are
        recorded and never abort the run.
        """
        report = RefreshReport()
        with self._refresh_lock:
            for page in pages:
                report.pages += 1
                try:
                    html = self.fetcher(page).decode("utf-8", errors="replace")
                except FetchError as exc:
                    report.errors.append(str(exc))
                    continue
                page_host = (urlparse(page).hostname or "").lower()

                for url in extract_script_urls(html, page):
                    report.scripts_seen += 1
                    try:
                        source = self.fetcher(url)
                    except FetchError as exc:
                        report.errors.append(str(exc))
                        continue
                    digest = content_hash(source)
                    if self._seen_hashes.get(url) == digest:
                        continue
                    host = (urlparse(url).hostname or page_host).lower()
                    self._label(url, host, source)
                    self._seen_hashes[url] = digest
                    report.newly_labeled += 1

                for body in extract_inline_scripts(html):
                    report.scripts_seen += 1
                    source = body.encode("utf-8")
                    key = f"hash:{content_hash(source)}"
                    if key in self._seen_hashes:
                        continue
                    self._label(key, page_host, source)
                    self._seen_hashes[key] = key[5:]
                    report.newly_labeled += 1

            if self._seen_hash_path:
                self._seen_hash_path.write_text(
                    json.dumps(self._seen_hashes), encoding="utf-8"
                )
        log.info("refresh: %s", report.to_dict())
        return report


# --- HTTP layer ---------------------------------------------------------------

def _make_handler(service: LabelService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "slimweb-labels/0.1"

        def log_message(self, fmt, *args):
            log.debug("service: " + fmt, *args)

        def _reply(self, status: int, body: bytes, content_type: str) -> None:
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _reply_json(self, status: int, obj: dict) -> None:
            self._reply(status, json.dumps(obj).encode("utf-8"),
                        "application/json")

        def do_GET(self):
            parsed = urlparse(self.path)
            if parsed.path == "/v1/labels":
                query = parse_qs(parsed.query)
                try:
                    since = int(query.get("since", ["0"])[0])
                except ValueError:
                    self._reply_json(400, {"error": "bad since parameter"})
                    return
                from .store import snapshot_line
                lines = [
                    snapshot_line(entry) + "\n"
                    for entry in service.store.snapshot_since(since)
                ]
                self._reply(200, "".join(lines).encode("utf-8"),
                            "application/x-ndjson")
            elif parsed.path == "/v1/health":
                self._reply_json(200, {
                    "model_version": service.model.version,
                    "store_entries": len(service.store),
                })
            else:
                self._reply_json(404, {"error": "not found"})

        def do_POST(self):
            parsed = urlparse(self.path)
            if parsed.path != "/v1/classify":
                self._reply_json(404, {"error": "not found"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length) or b"{}")
                url = payload["url"]
            except (ValueError, KeyError):
                self._reply_json(400, {"error": "body must be JSON with a url"})
                return
            source = None
            if payload.get("source") is not None:
                try:
                    source = base64.b64decode(payload["source"], validate=True)
                except (binascii.Error, ValueError):
                    self._reply_json(400, {"error": "source must be base64"})
                    return
            try:
                entry = service.classify_remote(url, source)
            except MissClassificationDisabled as exc:
                self._reply_json(403, {"error": str(exc)})
                return
            except FetchError as exc:
                self._reply_json(502, {"error": str(exc)})
                return
            self._reply_json(200, {
                "category": entry.category,
                "confidence": entry.confidence,
            })

    return Handler


def make_server(service: LabelService, listen: tuple[str, int]) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer(listen, _make_handler(service))
    server.daemon_threads = True
    return server


class RunningService:
    """A started service: the HTTP server plus its refresh loop."""

    def __init__(self, service: LabelService, server: ThreadingHTTPServer,
                 stop: threading.Event):
        self.service = service
        self.server = server
        self._stop = stop

    @property
    def address(self) -> tuple[str, int]:
        return self.server.server_address[:2]

    def serve_forever(self) -> None:
        """Block until interrupted; the server runs on its own threads."""
        try:
            self._stop.wait()
        except KeyboardInterrupt:
            pass
        finally:
            self.shutdown()

    def shutdown(self) -> None:
        self._stop.set()
        self.server.shutdown()
        self.server.server_close()
        self.service.store.close()


def start_service(config: ServiceConfig) -> RunningService:
    """Load model/store/vocab, run the first refresh, start the server.

    Startup failures (unreadable model or store, bind failure) raise.
    """
    vocab = (
        load_api_catalog(config.vocab_path)
        if config.vocab_path
        else builtin_catalog()
    )
    model, default_threshold = load_model(config.model_path)
    store = LabelStore(StoreConfig(path=config.store_path))
    service = LabelService(
        store=store,
        model=model,
        vocab=vocab,
        threshold=(
            config.threshold if config.threshold is not None else default_threshold
        ),
        allow_miss_classification=config.allow_miss_classification,
        seen_hash_path=str(config.store_path) + ".seen.json",
    )
    pages = (
        read_page_list(config.page_list_path) if config.page_list_path else []
    )

    stop = threading.Event()

    def refresh_loop():
        while not stop.wait(config.refresh_period):
            if pages:
                try:
                    service.refresh(pages)
                except Exception:
                    log.exception("periodic refresh failed")

    if pages:
        service.refresh(pages)
    threading.Thread(target=refresh_loop, daemon=True).start()

    server = make_server(service, config.listen)
    log.info("label service listening on %s:%d", *server.server_address[:2])
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return RunningService(service, server, stop)


def serve(config: ServiceConfig) -> None:
    """Blocking entry point: start everything, serve until interrupted."""
    start_service(config).serve_forever()
