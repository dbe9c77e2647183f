"""The whole loop on localhost: crawl, classify, distribute, block, measure.

A fixture site with 23 scripts (mirroring the motivating case study's
shape) is served locally; the label service crawls and classifies it;
the blocking proxy consults the resulting store; the bench harness
fetches the page both ways and reports the savings.

Run: python demos/06_end_to_end_blocking.py
"""

import json
import tempfile
import threading
import urllib.request
from functools import partial
from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from slimweb.bench import bench
from slimweb.model import TrainConfig, init_model, train
from slimweb.proxy import run_proxy
from slimweb.service import LabelService, make_server, http_fetcher
from slimweb.store import LabelStore, StoreConfig, default_policy
from slimweb.synth import marker_dataset

root = Path(tempfile.mkdtemp(prefix="slimweb-e2e-"))

# -- 1. a fixture site: 18 blockable scripts, 5 critical ones
plan = [("advertising", 10, 40960), ("analytics", 8, 38400),
        ("utility", 2, 122880), ("content", 1, 122880),
        ("video", 1, 122880), ("hosting", 1, 122880)]
site = root / "site"
site.mkdir()
names = []
for category, count, size in plan:
    for i in range(count):
        name = f"{category}_{i:02d}.js"
        line = f"marker_{category}();\n".encode()
        body = line * (size // len(line))
        (site / name).write_bytes(body + b" " * (size - len(body)))
        names.append(name)
refs = "\n".join(f'<script src="/{n}"></script>' for n in names)
(site / "page.html").write_text(f"<html>{refs}<body>demo</body></html>")

httpd = ThreadingHTTPServer(
    ("127.0.0.1", 0), partial(SimpleHTTPRequestHandler, directory=str(site))
)
httpd.daemon_threads = True
threading.Thread(target=httpd.serve_forever, daemon=True).start()
page_url = f"http://127.0.0.1:{httpd.server_address[1]}/page.html"
print(f"fixture site: 23 scripts at {page_url}")

# -- 2. a classifier trained on the synthetic marker distribution
dataset, vocab = marker_dataset(4000, n_features=16, seed=1)
model, _ = train(init_model(16, seed=1, vocab_version=vocab.version),
                 dataset, TrainConfig(epochs=25, seed=1))
model.version = "demo-model"

# -- 3. the label service crawls the site and stores labels
store = LabelStore(StoreConfig(path=root / "labels.db"))
service = LabelService(store=store, model=model, vocab=vocab,
                       threshold=0.5, fetcher=http_fetcher)
report = service.refresh([page_url])
print(f"service refresh: {report.scripts_seen} scripts seen, "
      f"{report.newly_labeled} labeled")

api = make_server(service, ("127.0.0.1", 0))
threading.Thread(target=api.serve_forever, daemon=True).start()
api_url = f"http://127.0.0.1:{api.server_address[1]}"
health = json.loads(urllib.request.urlopen(f"{api_url}/v1/health").read())
print(f"label service: {api_url} -> {health}")
label_lines = urllib.request.urlopen(
    f"{api_url}/v1/labels?since=0").read().decode().strip().splitlines()
print(f"labels endpoint serves {len(label_lines)} entries; first:",
      label_lines[0][:90], "...")

# -- 4. the blocking proxy consults the same store
proxy = run_proxy(("127.0.0.1", 0), store, default_policy(),
                  admin_listen=("127.0.0.1", 0))
print(f"proxy: {proxy.address[0]}:{proxy.address[1]}")

# -- 5. measure: direct vs proxied
result = bench(page_url, "%s:%d" % proxy.address)
print("\nbench report:")
for key, value in result.to_dict().items():
    print(f"  {key:<17} {value}")
saved_kb = result.bytes_saved / 1024
total_kb = result.bytes_total / 1024
print(f"\n{result.requests_total - 1} script requests became "
      f"{result.scripts_fetched}; {total_kb:.0f} KB became "
      f"{total_kb - saved_kb:.0f} KB "
      f"({100 * result.bytes_saved / result.bytes_total:.0f}% saved)")

telemetry = json.loads(urllib.request.urlopen(
    "http://%s:%d/telemetry" % proxy.admin_address).read())
print("proxy telemetry:", telemetry)

proxy.shutdown()
api.shutdown()
httpd.shutdown()
store.close()
