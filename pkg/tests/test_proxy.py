"""Blocking proxy: decisions, stub contract, pass-through, MITM."""

import json
import random
import ssl
import threading
import time
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import urlparse

import pytest

from slimweb.categories import CATEGORIES
from slimweb.proxy import (
    Decision,
    ProxyRequest,
    STUB_BODY,
    decide,
    is_script_request,
    run_proxy,
    stub_response,
)
from slimweb.store import (
    LabelEntry,
    LabelStore,
    Policy,
    StoreConfig,
    default_policy,
)

NOW = int(time.time())


def label(store, url, category, domain=None):
    store.put(LabelEntry(
        key=url,
        domain=domain or urlparse(url).hostname,
        category=category,
        confidence=0.9,
        labeled_at=NOW,
    ))


@pytest.fixture()
def store(tmp_path):
    with LabelStore(StoreConfig(path=tmp_path / "labels.db")) as s:
        yield s


class ExplodingStore:
    """Store stand-in whose lookups always fail."""

    def get(self, key):
        raise RuntimeError("lookup wiring is broken")


class TestDecide:
    def test_labeled_noncritical_script_blocks(self, store):
        url = "http://ads.test/t.js"
        label(store, url, "analytics")
        request = ProxyRequest("GET", url, is_script_context=True)
        assert decide(request, store, default_policy()) == \
            Decision("block", category="analytics")

    def test_unlabeled_script_allows(self, store):
        request = ProxyRequest("GET", "http://x.test/a.js",
                               is_script_context=True)
        assert decide(request, store, default_policy()).action == "allow"

    def test_non_script_on_labeled_domain_allows(self, store):
        label(store, "http://ads.test/t.js", "analytics")
        request = ProxyRequest("GET", "http://ads.test/banner.png",
                               is_script_context=False)
        assert decide(request, store, default_policy()).action == "allow"

    def test_unassigned_label_allows(self, store):
        url = "http://odd.test/m.js"
        label(store, url, "unassigned")
        request = ProxyRequest("GET", url, is_script_context=True)
        assert decide(request, store, default_policy()).action == "allow"

    def test_critical_category_allows(self, store):
        url = "http://videos.test/v.js"
        label(store, url, "video")
        request = ProxyRequest("GET", url, is_script_context=True)
        assert decide(request, store, default_policy()).action == "allow"

    def test_per_page_override_allows(self, store):
        url = "http://ads.test/t.js"
        label(store, url, "analytics")
        policy = Policy(per_page_overrides={
            "http://page.test": frozenset({"analytics"}),
        })
        request = ProxyRequest("GET", url, is_script_context=True)
        assert decide(request, store, policy, "http://page.test").action == \
            "allow"
        assert decide(request, store, policy, "http://other.test").action == \
            "block"

    def test_empty_noncritical_never_blocks(self, store):
        rng = random.Random(0)
        policy = Policy(noncritical=frozenset())
        hosts = [f"h{i}.test" for i in range(10)]
        for i in range(40):
            url = f"http://{rng.choice(hosts)}/s{i}.js"
            label(store, url, rng.choice(CATEGORIES))
        for i in range(200):
            url = f"http://{rng.choice(hosts)}/s{rng.randrange(60)}.js"
            request = ProxyRequest(
                "GET", url, is_script_context=rng.random() < 0.7
            )
            assert decide(request, store, policy).action == "allow"

    def test_store_failure_fails_open(self):
        request = ProxyRequest("GET", "http://ads.test/t.js",
                               is_script_context=True)
        assert decide(request, ExplodingStore(), default_policy()).action == \
            "allow"

    def test_domain_consensus_applies_to_unseen_urls(self, store):
        for i in range(3):
            label(store, f"http://ads.test/known{i}.js", "advertising")
        request = ProxyRequest("GET", "http://ads.test/fresh.js",
                               is_script_context=True)
        assert decide(request, store, default_policy()).action == "block"


class TestStubResponse:
    def test_fixed_body(self):
        status, headers, body = stub_response()
        assert status == 200
        assert body == b"/*slimweb-blocked*/\n"

    def test_body_byte_length(self):
        # oracle: count the fixed body bytes
        expected = len("/*slimweb-blocked*/\n".encode("utf-8"))
        assert len(stub_response()[2]) == expected == 20

    def test_headers_forbid_caching_and_declare_js(self):
        _, headers, body = stub_response()
        header_map = dict(headers)
        assert header_map["Cache-Control"] == "no-store"
        assert "javascript" in header_map["Content-Type"]
        assert int(header_map["Content-Length"]) == len(body)

    def test_idempotent(self):
        assert stub_response() == stub_response()


class TestIsScriptRequest:
    def test_path_extensions(self):
        assert is_script_request("http://x.test/a.js")
        assert is_script_request("http://x.test/mod.mjs?v=2")
        assert not is_script_request("http://x.test/a.css")
        assert not is_script_request("http://x.test/a.js.map")

    def test_fetch_destination_header(self):
        headers = {"Sec-Fetch-Dest": "script"}
        assert is_script_request("http://x.test/loader", headers)
        assert not is_script_request("http://x.test/loader",
                                     {"Sec-Fetch-Dest": "image"})


def request_via(proxy_address, url, method="GET", headers=None):
    host, port = proxy_address
    opener = urllib.request.build_opener(
        urllib.request.ProxyHandler({"http": f"http://{host}:{port}"})
    )
    req = urllib.request.Request(url, method=method, headers=headers or {})
    with opener.open(req, timeout=10) as resp:
        return resp.status, dict(resp.headers), resp.read()


class TestProxyEndToEnd:
    @pytest.fixture()
    def running(self, fixture_site, store):
        for name, category, _ in fixture_site.scripts:
            label(store, fixture_site.script_url(name), category,
                  domain="127.0.0.1")
        proxy = run_proxy(("127.0.0.1", 0), store, default_policy(),
                          admin_listen=("127.0.0.1", 0))
        yield proxy, fixture_site
        proxy.shutdown()

    def test_blocks_exactly_the_noncritical_scripts(self, running):
        proxy, site = running
        blocked = passed = 0
        for name, category, size in site.scripts:
            _, _, body = request_via(proxy.address, site.script_url(name))
            if body == STUB_BODY:
                blocked += 1
                assert category in ("advertising", "analytics")
            else:
                passed += 1
                assert len(body) == size
        assert blocked == 18
        assert passed == 5
        assert site.script_hits() == 5  # stubbed requests never hit upstream

    def test_page_html_passes_untouched(self, running):
        proxy, site = running
        status, _, body = request_via(proxy.address, site.page_url)
        assert status == 200
        assert body == site.files["page.html"]

    def test_telemetry_counters(self, running):
        proxy, site = running
        for name, _, _ in site.scripts:
            request_via(proxy.address, site.script_url(name))
        snap = proxy.telemetry_snapshot()
        assert snap.requests_total == 23
        assert snap.requests_blocked == 18
        assert snap.blocked_by_category == {"advertising": 10, "analytics": 8}

    def test_telemetry_admin_endpoint(self, running):
        proxy, site = running
        request_via(proxy.address, site.script_url("advertising_00.js"))
        host, port = proxy.admin_address
        with urllib.request.urlopen(f"http://{host}:{port}/telemetry") as resp:
            data = json.loads(resp.read())
        assert data["requests_total"] == 1
        assert data["requests_blocked"] == 1

    def test_counters_never_decrease(self, running):
        proxy, site = running
        last = (0, 0)
        for name, _, _ in site.scripts[:6]:
            request_via(proxy.address, site.script_url(name))
            snap = proxy.telemetry_snapshot()
            current = (snap.requests_total, snap.requests_blocked)
            assert current >= last
            last = current

    def test_block_is_idempotent(self, running):
        proxy, site = running
        url = site.script_url("analytics_03.js")
        first = request_via(proxy.address, url)
        second = request_via(proxy.address, url)
        assert first[2] == second[2] == STUB_BODY

    def test_fresh_proxy_telemetry_is_zero(self, store):
        proxy = run_proxy(("127.0.0.1", 0), store, default_policy())
        try:
            snap = proxy.telemetry_snapshot()
            assert snap.requests_total == 0
            assert snap.requests_blocked == 0
            assert snap.bytes_upstream_saved == 0
        finally:
            proxy.shutdown()

    def test_empty_store_passes_everything(self, fixture_site, store):
        proxy = run_proxy(("127.0.0.1", 0), store, default_policy())
        try:
            for name, _, size in fixture_site.scripts:
                _, _, body = request_via(
                    proxy.address, fixture_site.script_url(name)
                )
                assert len(body) == size
            assert fixture_site.script_hits() == 23
        finally:
            proxy.shutdown()

    def test_failing_store_is_byte_identical_to_passthrough(self, fixture_site):
        proxy = run_proxy(("127.0.0.1", 0), ExplodingStore(), default_policy())
        try:
            for name, _, _ in fixture_site.scripts[:5]:
                url = fixture_site.script_url(name)
                _, _, via_proxy = request_via(proxy.address, url)
                with urllib.request.urlopen(url) as resp:
                    direct = resp.read()
                assert via_proxy == direct
        finally:
            proxy.shutdown()

    def test_referer_drives_page_override(self, fixture_site, store):
        url = fixture_site.script_url("analytics_00.js")
        label(store, url, "analytics", domain="127.0.0.1")
        policy = Policy(per_page_overrides={
            "http://page.test": frozenset({"analytics"}),
        })
        proxy = run_proxy(("127.0.0.1", 0), store, policy)
        try:
            _, _, blocked = request_via(proxy.address, url)
            assert blocked == STUB_BODY
            _, _, allowed = request_via(
                proxy.address, url,
                headers={"Referer": "http://page.test/article.html"},
            )
            assert allowed != STUB_BODY
        finally:
            proxy.shutdown()

    def test_origin_form_request_is_rejected(self, store):
        proxy = run_proxy(("127.0.0.1", 0), store, default_policy())
        try:
            import http.client

            conn = http.client.HTTPConnection(*proxy.address, timeout=5)
            conn.request("GET", "/no-absolute-form")
            resp = conn.getresponse()
            assert resp.status == 400
            conn.close()
        finally:
            proxy.shutdown()


class TestConnectTunnel:
    def test_opaque_tunnel_passes_bytes(self, fixture_site, store):
        proxy = run_proxy(("127.0.0.1", 0), store, default_policy())
        try:
            import http.client

            host, port = proxy.address
            conn = http.client.HTTPConnection(host, port, timeout=10)
            site_host, site_port = fixture_site.server.server_address[:2]
            conn.set_tunnel(site_host, site_port)
            conn.request("GET", "/utility_00.js")
            resp = conn.getresponse()
            body = resp.read()
            assert resp.status == 200
            assert len(body) == 122880
            conn.close()
        finally:
            proxy.shutdown()


class TlsUpstream:
    """Minimal TLS site used to exercise interception."""

    def __init__(self, minter, body: bytes):
        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                pass

            def do_GET(self):
                payload = body if self.path.endswith(".js") else b"<html/>"
                self.send_response(200)
                self.send_header("Content-Type", "application/javascript")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.daemon_threads = True
        ctx = minter.context_for("127.0.0.1")
        self.server.socket = ctx.wrap_socket(
            self.server.socket, server_side=True
        )
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    @property
    def port(self):
        return self.server.server_address[1]

    def stop(self):
        self.server.shutdown()
        self.server.server_close()


class TestMitm:
    def test_intercepted_https_script_is_blocked(self, tmp_path, store):
        from slimweb.tlsmitm import CertMinter, generate_ca

        cert_pem, key_pem = generate_ca()
        ca_cert = tmp_path / "ca.pem"
        ca_key = tmp_path / "ca.key"
        ca_cert.write_bytes(cert_pem)
        ca_key.write_bytes(key_pem)
        minter = CertMinter(ca_cert, ca_key)

        upstream = TlsUpstream(minter, b"var tracked = true;\n" * 10)
        proxy = run_proxy(
            ("127.0.0.1", 0), store, default_policy(),
            mitm_ca=(ca_cert, ca_key), upstream_cafile=ca_cert,
        )
        try:
            blocked_url = f"https://127.0.0.1:{upstream.port}/beacon.js"
            allowed_url = f"https://127.0.0.1:{upstream.port}/app.js"
            label(store, blocked_url, "advertising", domain="127.0.0.1")
            label(store, allowed_url, "utility", domain="127.0.0.1")

            client_ctx = ssl.create_default_context(cafile=str(ca_cert))
            host, port = proxy.address
            opener = urllib.request.build_opener(
                urllib.request.ProxyHandler(
                    {"https": f"http://{host}:{port}"}
                ),
                urllib.request.HTTPSHandler(context=client_ctx),
            )
            with opener.open(blocked_url, timeout=10) as resp:
                assert resp.read() == STUB_BODY
            with opener.open(allowed_url, timeout=10) as resp:
                assert resp.read() == b"var tracked = true;\n" * 10
        finally:
            proxy.shutdown()
            upstream.stop()

    def test_minted_leaf_is_signed_by_ca(self, tmp_path):
        from cryptography import x509

        from slimweb.tlsmitm import CertMinter, generate_ca

        cert_pem, key_pem = generate_ca("test CA")
        (tmp_path / "ca.pem").write_bytes(cert_pem)
        (tmp_path / "ca.key").write_bytes(key_pem)
        minter = CertMinter(tmp_path / "ca.pem", tmp_path / "ca.key")
        leaf_pem = minter._mint("blocked.example")
        leaf = x509.load_pem_x509_certificate(leaf_pem)
        ca = x509.load_pem_x509_certificate(cert_pem)
        assert leaf.issuer == ca.subject
        names = leaf.extensions.get_extension_for_class(
            x509.SubjectAlternativeName
        ).value.get_values_for_type(x509.DNSName)
        assert names == ["blocked.example"]
