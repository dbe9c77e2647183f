"""Request/byte comparison of a page loaded directly vs through the proxy.

This is a static fetch harness: it downloads the page HTML and every
referenced external script, once directly and once through the blocking
proxy, and reports the request and byte deltas. No JavaScript runs, so
browser timing metrics are deliberately out of scope.
"""

from __future__ import annotations

import json
import urllib.request
from dataclasses import dataclass

from .corpus import extract_script_urls
from .proxy import STUB_BODY


@dataclass
class BenchReport:
    page: str
    requests_total: int      # direct run: page + every script
    requests_blocked: int    # scripts answered by the proxy stub
    scripts_fetched: int     # scripts that still reached upstream
    bytes_total: int         # direct run byte volume
    bytes_saved: int         # direct minus proxied byte volume

    def to_dict(self) -> dict:
        return {
            "page": self.page,
            "requests_total": self.requests_total,
            "requests_blocked": self.requests_blocked,
            "scripts_fetched": self.scripts_fetched,
            "bytes_total": self.bytes_total,
            "bytes_saved": self.bytes_saved,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _fetch(url: str, proxy: str | None, timeout: float) -> bytes:
    if proxy:
        handler = urllib.request.ProxyHandler({"http": proxy, "https": proxy})
        opener = urllib.request.build_opener(handler)
    else:
        opener = urllib.request.build_opener(
            urllib.request.ProxyHandler({})
        )
    with opener.open(url, timeout=timeout) as resp:
        return resp.read()


def bench(page_url: str, proxy: str, timeout: float = 30.0) -> BenchReport:
    """Fetch ``page_url`` and its scripts directly and through ``proxy``.

    ``proxy`` is ``host:port`` or a full ``http://host:port`` URL.
    """
    if "://" not in proxy:
        proxy = f"http://{proxy}"

    html = _fetch(page_url, None, timeout)
    scripts = extract_script_urls(html.decode("utf-8", "replace"), page_url)
    direct_bytes = len(html)
    direct_sizes: dict[str, int] = {}
    for url in scripts:
        direct_sizes[url] = len(_fetch(url, None, timeout))
        direct_bytes += direct_sizes[url]

    proxied_bytes = len(_fetch(page_url, proxy, timeout))
    blocked = 0
    for url in scripts:
        body = _fetch(url, proxy, timeout)
        proxied_bytes += len(body)
        if body == STUB_BODY:
            blocked += 1

    return BenchReport(
        page=page_url,
        requests_total=1 + len(scripts),
        requests_blocked=blocked,
        scripts_fetched=len(scripts) - blocked,
        bytes_total=direct_bytes,
        bytes_saved=direct_bytes - proxied_bytes,
    )
