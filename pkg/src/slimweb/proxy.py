"""Label-driven blocking forward proxy.

Every request passes through one decision: block only when the target is
a script resource, a label resolves in the store, and the policy marks
that label's category noncritical for the requesting page. Anything else
— including any internal error while deciding — is proxied through
untouched, so a broken store can never break a page (fail-open).

Blocked scripts are answered with a tiny 200 JavaScript stub rather than
an error, which keeps onload/onerror handling on the page intact.
"""

from __future__ import annotations

import json
import logging
import select
import socket
import ssl
import threading
from dataclasses import dataclass, field
from http.client import HTTPConnection, HTTPException, HTTPSConnection
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import urlparse, urlunparse

from .store import LabelStore, Policy, decide_criticality

log = logging.getLogger(__name__)

STUB_BODY = b"/*slimweb-blocked*/\n"
STUB_CONTENT_TYPE = "application/javascript"

SCRIPT_EXTENSIONS = (".js", ".mjs")

_HOP_BY_HOP = {
    "connection", "proxy-connection", "keep-alive", "te", "trailers",
    "transfer-encoding", "upgrade", "proxy-authorization", "proxy-authenticate",
}


@dataclass
class ProxyTelemetry:
    requests_total: int = 0
    requests_blocked: int = 0
    bytes_upstream_saved: int = 0
    blocked_by_category: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "requests_total": self.requests_total,
            "requests_blocked": self.requests_blocked,
            "bytes_upstream_saved": self.bytes_upstream_saved,
            "blocked_by_category": dict(self.blocked_by_category),
        }


@dataclass(frozen=True)
class ProxyRequest:
    method: str
    url: str
    is_script_context: bool = False


@dataclass(frozen=True)
class Decision:
    action: str  # "allow" | "block"
    category: str | None = None


def is_script_request(url: str, headers=None) -> bool:
    """Script by path extension or by a declared script destination."""
    if headers is not None:
        if headers.get("Sec-Fetch-Dest", "").lower() == "script":
            return True
    path = urlparse(url).path.lower()
    return path.endswith(SCRIPT_EXTENSIONS)


def decide(
    request: ProxyRequest,
    store: LabelStore,
    policy: Policy,
    page_origin: str | None = None,
) -> Decision:
    """Block/allow for one request; any internal error means allow."""
    try:
        if not request.is_script_context:
            return Decision("allow")
        entry = store.get(request.url)
        if entry is None:
            return Decision("allow")  # label miss: conservatively critical
        if decide_criticality(entry.category, policy, page_origin) == "noncritical":
            return Decision("block", category=entry.category)
        return Decision("allow", category=entry.category)
    except Exception:
        log.exception("decide failed for %s; failing open", request.url)
        return Decision("allow")


def stub_response() -> tuple[int, list[tuple[str, str]], bytes]:
    """(status, headers, body) served in place of a blocked script."""
    headers = [
        ("Content-Type", STUB_CONTENT_TYPE),
        ("Content-Length", str(len(STUB_BODY))),
        ("Cache-Control", "no-store"),
    ]
    return 200, headers, STUB_BODY


def _page_origin_from_referer(referer: str | None) -> str | None:
    if not referer:
        return None
    parts = urlparse(referer)
    if not parts.scheme or not parts.netloc:
        return None
    return f"{parts.scheme}://{parts.netloc}"


class ProxyServer:
    """Forward proxy plus optional admin endpoint; start()/shutdown()."""

    def __init__(
        self,
        listen: tuple[str, int],
        store: LabelStore,
        policy: Policy,
        admin_listen: tuple[str, int] | None = None,
        cert_minter=None,
        upstream_cafile: str | Path | None = None,
        upstream_timeout: float = 30.0,
    ):
        self.store = store
        self.policy = policy
        self.telemetry = ProxyTelemetry()
        self._telemetry_lock = threading.Lock()
        self.cert_minter = cert_minter
        self.upstream_timeout = upstream_timeout
        if upstream_cafile:
            self._upstream_ctx = ssl.create_default_context(
                cafile=str(upstream_cafile)
            )
        else:
            self._upstream_ctx = ssl.create_default_context()

        self._server = ThreadingHTTPServer(listen, self._make_handler())
        self._server.daemon_threads = True
        self._admin_server = None
        if admin_listen is not None:
            self._admin_server = ThreadingHTTPServer(
                admin_listen, self._make_admin_handler()
            )
            self._admin_server.daemon_threads = True
        self._threads: list[threading.Thread] = []

    # -- lifecycle

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    @property
    def admin_address(self) -> tuple[str, int] | None:
        if self._admin_server is None:
            return None
        return self._admin_server.server_address[:2]

    def start(self) -> None:
        for server in filter(None, (self._server, self._admin_server)):
            thread = threading.Thread(target=server.serve_forever, daemon=True)
            thread.start()
            self._threads.append(thread)

    def serve_forever(self) -> None:
        if self._admin_server is not None:
            thread = threading.Thread(
                target=self._admin_server.serve_forever, daemon=True
            )
            thread.start()
            self._threads.append(thread)
        self._server.serve_forever()

    def shutdown(self) -> None:
        for server in filter(None, (self._server, self._admin_server)):
            server.shutdown()
            server.server_close()

    # -- telemetry

    def telemetry_snapshot(self) -> ProxyTelemetry:
        with self._telemetry_lock:
            return ProxyTelemetry(
                requests_total=self.telemetry.requests_total,
                requests_blocked=self.telemetry.requests_blocked,
                bytes_upstream_saved=self.telemetry.bytes_upstream_saved,
                blocked_by_category=dict(self.telemetry.blocked_by_category),
            )

    def _count_request(self) -> None:
        with self._telemetry_lock:
            self.telemetry.requests_total += 1

    def _count_block(self, category: str | None, saved: int = 0) -> None:
        with self._telemetry_lock:
            self.telemetry.requests_blocked += 1
            self.telemetry.bytes_upstream_saved += saved
            if category:
                counts = self.telemetry.blocked_by_category
                counts[category] = counts.get(category, 0) + 1

    # -- handlers

    def _make_handler(proxy_self):
        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"
            server_version = "slimweb-proxy/0.1"

            def log_message(self, fmt, *args):
                log.debug("proxy: " + fmt, *args)

            def handle_one_request(self):
                try:
                    super().handle_one_request()
                except (ConnectionError, ssl.SSLError, socket.timeout):
                    self.close_connection = True

            def _target_url(self) -> str | None:
                origin = getattr(self.connection, "_slimweb_origin", None)
                if origin is not None:
                    host, port = origin
                    netloc = host if port == 443 else f"{host}:{port}"
                    return f"https://{netloc}{self.path}"
                if self.path.startswith(("http://", "https://")):
                    return self.path
                return None

            def _proxy(self):
                url = self._target_url()
                if url is None:
                    self.send_error(400, "proxy expects absolute-form requests")
                    return
                proxy_self._count_request()
                request = ProxyRequest(
                    method=self.command,
                    url=url,
                    is_script_context=is_script_request(url, self.headers),
                )
                page_origin = _page_origin_from_referer(
                    self.headers.get("Referer")
                )
                decision = decide(
                    request, proxy_self.store, proxy_self.policy, page_origin
                )
                if decision.action == "block":
                    status, headers, body = stub_response()
                    self.send_response(status)
                    for name, value in headers:
                        self.send_header(name, value)
                    self.end_headers()
                    if self.command != "HEAD":
                        self.wfile.write(body)
                    proxy_self._count_block(decision.category)
                    return
                self._forward(url)

            def _forward(self, url: str):
                parts = urlparse(url)
                is_https = parts.scheme == "https"
                port = parts.port or (443 if is_https else 80)
                body = None
                length = self.headers.get("Content-Length")
                if length:
                    body = self.rfile.read(int(length))
                try:
                    if is_https:
                        conn = HTTPSConnection(
                            parts.hostname, port,
                            timeout=proxy_self.upstream_timeout,
                            context=proxy_self._upstream_ctx,
                        )
                    else:
                        conn = HTTPConnection(
                            parts.hostname, port,
                            timeout=proxy_self.upstream_timeout,
                        )
                    path = urlunparse(
                        ("", "", parts.path or "/", parts.params,
                         parts.query, "")
                    )
                    headers = {
                        k: v for k, v in self.headers.items()
                        if k.lower() not in _HOP_BY_HOP
                    }
                    headers["Connection"] = "close"
                    conn.request(self.command, path, body=body, headers=headers)
                    resp = conn.getresponse()
                    payload = resp.read()
                    conn.close()
                except (OSError, HTTPException) as exc:
                    self.send_error(502, f"upstream fetch failed: {exc}")
                    return
                self.send_response(resp.status, resp.reason)
                for name, value in resp.getheaders():
                    if name.lower() in _HOP_BY_HOP or name.lower() == "content-length":
                        continue
                    self.send_header(name, value)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                if self.command != "HEAD":
                    self.wfile.write(payload)

            do_GET = do_POST = do_PUT = do_DELETE = do_OPTIONS = do_PATCH = \
                do_HEAD = _proxy

            def do_CONNECT(self):
                host, _, port_text = self.path.partition(":")
                port = int(port_text or "443")
                if proxy_self.cert_minter is not None:
                    self._mitm(host, port)
                else:
                    self._tunnel(host, port)

            def _tunnel(self, host: str, port: int):
                try:
                    upstream = socket.create_connection(
                        (host, port), timeout=proxy_self.upstream_timeout
                    )
                except OSError as exc:
                    self.send_error(502, f"cannot reach {host}:{port}: {exc}")
                    return
                self.send_response(200, "Connection Established")
                self.end_headers()
                proxy_self._count_request()
                client = self.connection
                try:
                    sockets = [client, upstream]
                    while True:
                        readable, _, broken = select.select(sockets, [], sockets, 60)
                        if broken or not readable:
                            break
                        done = False
                        for sock in readable:
                            data = sock.recv(65536)
                            if not data:
                                done = True
                                break
                            (upstream if sock is client else client).sendall(data)
                        if done:
                            break
                finally:
                    upstream.close()
                self.close_connection = True

            def _mitm(self, host: str, port: int):
                self.send_response(200, "Connection Established")
                self.end_headers()
                try:
                    ctx = proxy_self.cert_minter.context_for(host)
                    tls = ctx.wrap_socket(self.connection, server_side=True)
                except (ssl.SSLError, OSError) as exc:
                    log.warning("mitm handshake with %s failed: %s", host, exc)
                    self.close_connection = True
                    return
                tls._slimweb_origin = (host, port)
                # serve the decrypted stream with this same handler class
                try:
                    Handler(tls, self.client_address, self.server)
                finally:
                    try:
                        tls.shutdown(socket.SHUT_RDWR)
                    except OSError:
                        pass
                    tls.close()
                    self.close_connection = True

        return Handler

    def _make_admin_handler(proxy_self):
        class AdminHandler(BaseHTTPRequestHandler):
            server_version = "slimweb-proxy-admin/0.1"

            def log_message(self, fmt, *args):
                log.debug("admin: " + fmt, *args)

            def do_GET(self):
                if urlparse(self.path).path != "/telemetry":
                    self.send_error(404)
                    return
                body = json.dumps(
                    proxy_self.telemetry_snapshot().to_dict()
                ).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        return AdminHandler


def run_proxy(
    listen: tuple[str, int],
    store: LabelStore,
    policy: Policy,
    admin_listen: tuple[str, int] | None = None,
    mitm_ca: tuple[str | Path, str | Path] | None = None,
    upstream_cafile: str | Path | None = None,
) -> ProxyServer:
    """Build and start a proxy; returns the running server object.

    ``mitm_ca`` is an optional (cert_path, key_path) pair; without it,
    CONNECT tunnels are passed through opaquely.
    """
    minter = None
    if mitm_ca is not None:
        from .tlsmitm import CertMinter

        minter = CertMinter(*mitm_ca)
    proxy = ProxyServer(
        listen=listen,
        store=store,
        policy=policy,
        admin_listen=admin_listen,
        cert_minter=minter,
        upstream_cafile=upstream_cafile,
    )
    proxy.start()
    return proxy
