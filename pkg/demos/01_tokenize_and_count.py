"""What the lexer sees in a script, and how it becomes a count vector.

Run: python demos/01_tokenize_and_count.py
"""

import numpy as np

from slimweb import builtin_catalog, extract_features, tokenize

snippet = """
// analytics beacon (this comment contributes nothing)
const endpoint = 'https://collector.example/v1';   // string: excluded
function report(event) {
    const img = document.createElement('img');
    img.src = `${endpoint}?e=${event}`;            // template text: excluded
    document.body.appendChild(img);
    window.addEventListener('unload', () => navigator.sendBeacon(endpoint));
}
"""

print("tokens in appearance order:")
print(" ", tokenize(snippet))

print("\nthe same code wrapped in a block comment yields nothing:")
print(" ", tokenize("/*" + snippet + "*/"))

vocab = builtin_catalog()
print(f"\nbundled API catalog: {len(vocab)} names, version {vocab.version}")

vector = extract_features(snippet, vocab)
hits = {vocab.names[i]: int(vector.counts[i])
        for i in np.flatnonzero(vector.counts)}
print("catalog names this snippet touches:")
for name, count in sorted(hits.items(), key=lambda kv: -kv[1]):
    print(f"  {count}x {name}")

doubled = extract_features(snippet + snippet, vocab)
print("\ncounting is linear: doubling the source doubles every count:",
      bool((doubled.counts == 2 * vector.counts).all()))
