"""Domain-suffix entity matching: how crawled scripts get training labels.

Run: python demos/02_entity_labels.py
"""

from slimweb.corpus import (
    ScriptRecord,
    build_dataset,
    builtin_entities,
    match_entity,
    registrable_domain,
)
from slimweb.features import Vocabulary

repo = builtin_entities()
print(f"bundled entity snapshot: {len(repo)} providers")
for category, count in repo.category_counts().items():
    print(f"  {category:<17} {count}")

print("\nlookups are longest label-aligned suffix matches:")
for url in [
    "https://www.google-analytics.com/analytics.js",
    "https://securepubads.doubleclick.net/tag/js/gpt.js",
    "https://connect.facebook.net/en_US/fbevents.js",
    "https://cdn.jsdelivr.net/npm/vue@3/dist/vue.global.js",
    "https://notdoubleclick.net/fake.js",        # label boundary: no match
    "https://self-hosted.example.com/bundle.js",  # unknown: no match
]:
    hit = match_entity(url, repo)
    host = registrable_domain(url)
    if hit is None:
        print(f"  {host:<38} -> (no match, stays unlabeled)")
    else:
        print(f"  {host:<38} -> {hit[1]} ({hit[0].name})")

# a miniature crawl: two labelable scripts, one unknown, one duplicate mirror
vocab = Vocabulary(names=("document", "createElement", "sendBeacon"))
crawl = [
    ScriptRecord(url="https://www.google-analytics.com/analytics.js",
                 source=b"sendBeacon(); sendBeacon();",
                 page_url="https://news.example/"),
    ScriptRecord(url="https://pagead2.googlesyndication.com/ads.js",
                 source=b"document.createElement('iframe')",
                 page_url="https://news.example/"),
    ScriptRecord(url="https://mirror.example/analytics-copy.js",
                 source=b"sendBeacon(); sendBeacon();",  # same bytes: deduped
                 page_url="https://blog.example/"),
    ScriptRecord(url="https://self-hosted.example.com/app.js",
                 source=b"document; document;",
                 page_url="https://blog.example/"),
]
dataset, unlabeled = build_dataset(crawl, repo, vocab)
print(f"\nfrom {len(crawl)} crawled scripts: {len(dataset)} labeled rows, "
      f"{len(unlabeled)} unlabeled (mirrored bytes count once)")
print("labeled rows:")
for (vector, category), key in zip(dataset.rows(), dataset.keys):
    print(f"  {category:<12} counts={vector.counts.tolist()}  {key}")
