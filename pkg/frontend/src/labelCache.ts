// Local label cache: byte-capped, least-recently-used eviction, and the
// same lookup semantics as the server store (exact key first, then a
// domain-level label when every cached label on that domain agrees).

import { LabelRecord } from "./types.js";

interface CacheEntry {
  record: LabelRecord;
  lastUsed: number;
  bytes: number;
}

function recordBytes(record: LabelRecord): number {
  return JSON.stringify(record).length + 1;
}

function hostnameOf(key: string): string | null {
  if (key.startsWith("hash:")) return null;
  try {
    return new URL(key).hostname.toLowerCase();
  } catch {
    return null;
  }
}

export interface CacheLookup {
  record: LabelRecord;
  inferred: boolean;
}

export class LabelCache {
  private entries = new Map<string, CacheEntry>();
  private byDomain = new Map<string, Set<string>>();
  private bytes = 0;

  constructor(readonly capacityBytes: number) {}

  get bytesUsed(): number {
    return this.bytes;
  }

  get size(): number {
    return this.entries.size;
  }

  keys(): string[] {
    return [...this.entries.keys()];
  }

  put(record: LabelRecord, now: number = Date.now() / 1000): void {
    const bytes = recordBytes(record);
    if (bytes > this.capacityBytes) {
      throw new Error(`label for ${record.key} exceeds the whole cache`);
    }
    this.remove(record.key);
    this.entries.set(record.key, { record, lastUsed: now, bytes });
    let domainKeys = this.byDomain.get(record.domain);
    if (!domainKeys) {
      domainKeys = new Set();
      this.byDomain.set(record.domain, domainKeys);
    }
    domainKeys.add(record.key);
    this.bytes += bytes;
    this.evictTo(this.capacityBytes, record.key);
  }

  private remove(key: string): void {
    const entry = this.entries.get(key);
    if (!entry) return;
    this.entries.delete(key);
    this.bytes -= entry.bytes;
    const domainKeys = this.byDomain.get(entry.record.domain);
    if (domainKeys) {
      domainKeys.delete(key);
      if (domainKeys.size === 0) this.byDomain.delete(entry.record.domain);
    }
  }

  private evictTo(limit: number, protectedKey?: string): void {
    while (this.bytes > limit) {
      let victim: CacheEntry | null = null;
      for (const entry of this.entries.values()) {
        if (entry.record.key === protectedKey) continue;
        if (
          !victim ||
          entry.lastUsed < victim.lastUsed ||
          (entry.lastUsed === victim.lastUsed &&
            entry.record.key < victim.record.key)
        ) {
          victim = entry;
        }
      }
      if (!victim) break;
      this.remove(victim.record.key);
    }
  }

  // Synchronous lookup; request handlers must never wait on storage.
  get(key: string, now: number = Date.now() / 1000): CacheLookup | null {
    const entry = this.entries.get(key);
    if (entry) {
      entry.lastUsed = now;
      return { record: entry.record, inferred: false };
    }
    const domain = hostnameOf(key);
    if (!domain) return null;
    const domainKeys = this.byDomain.get(domain);
    if (!domainKeys || domainKeys.size === 0) return null;
    let category: string | null = null;
    let confidence = 1;
    let labeledAt = 0;
    for (const peerKey of domainKeys) {
      const peer = this.entries.get(peerKey)!.record;
      if (category === null) category = peer.category;
      else if (category !== peer.category) return null; // no consensus
      confidence = Math.min(confidence, peer.confidence);
      labeledAt = Math.max(labeledAt, peer.labeled_at);
    }
    return {
      record: {
        key,
        domain,
        category: category as LabelRecord["category"],
        confidence,
        labeled_at: labeledAt,
      },
      inferred: true,
    };
  }
}
