"""Shared fixtures: a trained toy model and the 23-script fixture site."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from slimweb.model import ModelParameters, TrainConfig, init_model, train
from slimweb.features import Vocabulary
from slimweb.synth import marker_dataset

# Mirrors the shape of the motivating case study: 23 external scripts,
# 1300 KB of script bytes in total, 700 KB of it in the two categories
# the default policy blocks. Blocking must take 23 requests down to 5.
FIXTURE_PLAN: tuple[tuple[str, int, int], ...] = (
    ("advertising", 10, 40960),   # 400 KB
    ("analytics", 8, 38400),      # 300 KB
    ("utility", 2, 122880),
    ("content", 1, 122880),
    ("video", 1, 122880),
    ("hosting", 1, 122880),       # 600 KB critical in total
)
NONCRITICAL_DEFAULT = {"advertising", "analytics"}


def script_body(category: str, ordinal: int, size: int) -> bytes:
    """Deterministic JS filler of exactly ``size`` bytes, dominated by the
    category's marker token so a marker-trained model classifies it."""
    line = f"marker_{category}(); // unit {ordinal}\n".encode()
    body = line * (size // len(line))
    return body + b" " * (size - len(body))  # whitespace pad to exact size


@dataclass
class FixtureSite:
    """In-memory site: one page plus its scripts, with request counting."""

    files: dict[str, bytes]
    scripts: list[tuple[str, str, int]]  # (filename, category, size)
    hits: dict[str, int] = field(default_factory=dict)
    server: ThreadingHTTPServer | None = None

    @property
    def noncritical_bytes(self) -> int:
        return sum(size for _, cat, size in self.scripts
                   if cat in NONCRITICAL_DEFAULT)

    @property
    def total_script_bytes(self) -> int:
        return sum(size for _, _, size in self.scripts)

    @property
    def noncritical_count(self) -> int:
        return sum(1 for _, cat, _ in self.scripts if cat in NONCRITICAL_DEFAULT)

    def write_to(self, root: Path) -> Path:
        root.mkdir(parents=True, exist_ok=True)
        for name, data in self.files.items():
            (root / name).write_bytes(data)
        return root

    # -- live serving with per-path hit counts

    def start(self) -> "FixtureSite":
        site = self
        lock = threading.Lock()

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                pass

            def do_GET(self):
                name = self.path.lstrip("/") or "page.html"
                data = site.files.get(name)
                with lock:
                    site.hits[name] = site.hits.get(name, 0) + 1
                if data is None:
                    self.send_error(404)
                    return
                ctype = ("text/html" if name.endswith(".html")
                         else "application/javascript")
                self.send_response(200)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.daemon_threads = True
        threading.Thread(target=self.server.serve_forever, daemon=True).start()
        return self

    def stop(self) -> None:
        if self.server is not None:
            self.server.shutdown()
            self.server.server_close()
            self.server = None

    @property
    def base_url(self) -> str:
        assert self.server is not None, "site is not being served"
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def page_url(self) -> str:
        return f"{self.base_url}/page.html"

    def script_url(self, name: str) -> str:
        return f"{self.base_url}/{name}"

    def script_hits(self) -> int:
        return sum(count for name, count in self.hits.items()
                   if name.endswith(".js"))

    def reset_hits(self) -> None:
        self.hits.clear()


def build_fixture_site() -> FixtureSite:
    scripts: list[tuple[str, str, int]] = []
    files: dict[str, bytes] = {}
    for category, count, size in FIXTURE_PLAN:
        for i in range(count):
            name = f"{category}_{i:02d}.js"
            files[name] = script_body(category, i, size)
            scripts.append((name, category, size))
    refs = "\n".join(f'<script src="/{name}"></script>'
                     for name, _, _ in scripts)
    files["page.html"] = (
        "<!doctype html><html><head><title>fixture</title>\n"
        f"{refs}\n</head><body><p>fixture page</p></body></html>"
    ).encode()
    return FixtureSite(files=files, scripts=scripts)


@pytest.fixture(scope="session")
def fixture_site_files() -> FixtureSite:
    return build_fixture_site()


@pytest.fixture()
def fixture_site(fixture_site_files) -> FixtureSite:
    site = FixtureSite(
        files=fixture_site_files.files,
        scripts=fixture_site_files.scripts,
    )
    site.start()
    yield site
    site.stop()


@pytest.fixture(scope="session")
def toy_model_vocab() -> tuple[ModelParameters, Vocabulary]:
    """Small trained classifier over the 16-feature synthetic vocabulary."""
    dataset, vocab = marker_dataset(4000, n_features=16, seed=11)
    model = init_model(16, seed=7, vocab_version=vocab.version)
    trained, _ = train(model, dataset, TrainConfig(epochs=25, seed=7))
    trained.version = "toy-fixture-model"
    return trained, vocab
