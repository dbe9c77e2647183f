// The extension's engine: settings, label sync, the synchronous request
// decision, and the per-page state behind the popup. Browser-agnostic by
// construction; background.ts binds it to the webRequest surface.

import { LabelCache } from "./labelCache.js";
import { StorageArea } from "./storage.js";
import {
  BlockingResponse,
  CACHE_CAPACITY_BYTES,
  Category,
  ClientSettings,
  DEFAULT_SETTINGS,
  LabelRecord,
  RequestDetails,
  UNASSIGNED,
  isCategory,
} from "./types.js";

const SETTINGS_KEY = "slimweb.settings";
const LABELS_KEY = "slimweb.labels";

function cloneSettings(
  base: ClientSettings,
  overlay?: Partial<ClientSettings>,
): ClientSettings {
  const merged = { ...base, ...overlay };
  return {
    ...merged,
    noncritical: [...merged.noncritical],
    perPageOverrides: Object.fromEntries(
      Object.entries(merged.perPageOverrides).map(([origin, cats]) => [
        origin,
        [...cats],
      ]),
    ),
  };
}

export interface SyncResult {
  added: number;
  ok: boolean;
  error?: string;
}

export interface PopupItem {
  url: string;
  category: string;
  blocked: boolean;
  overridable: boolean; // only assigned, policy-blockable categories toggle
}

interface PageObservation {
  url: string;
  category: string;
  blocked: boolean;
}

export class ExtensionCore {
  settings: ClientSettings;
  readonly cache: LabelCache;
  lastSyncStatus: SyncResult = { added: 0, ok: true };
  private pages = new Map<string, Map<string, PageObservation>>();

  constructor(
    private storage: StorageArea,
    private fetchImpl: typeof fetch = fetch,
    cacheCapacity: number = CACHE_CAPACITY_BYTES,
  ) {
    this.settings = cloneSettings(DEFAULT_SETTINGS);
    this.cache = new LabelCache(cacheCapacity);
  }

  // -- lifecycle

  async load(): Promise<void> {
    const stored = (await this.storage.get(SETTINGS_KEY)) as
      | Partial<ClientSettings>
      | undefined;
    if (stored) {
      this.settings = cloneSettings(DEFAULT_SETTINGS, stored);
    }
    this.settings.noncritical = this.settings.noncritical.filter(isCategory);
    const labels = (await this.storage.get(LABELS_KEY)) as
      | LabelRecord[]
      | undefined;
    if (labels) {
      for (const record of labels) this.cache.put(record, record.labeled_at);
    }
  }

  private async persist(): Promise<void> {
    await this.storage.set(SETTINGS_KEY, this.settings);
  }

  private async persistLabels(): Promise<void> {
    const records = this.cache
      .keys()
      .map((key) => this.cache.get(key)!.record);
    await this.storage.set(LABELS_KEY, records);
  }

  get cacheBytesUsed(): number {
    return this.cache.bytesUsed;
  }

  // -- label sync (pull by last_sync; the service filters strictly newer)

  async syncLabels(): Promise<SyncResult> {
    const url =
      `${this.settings.serviceUrl}/v1/labels?since=${this.settings.lastSync}`;
    let body: string;
    try {
      const response = await this.fetchImpl(url);
      if (!response.ok) throw new Error(`service answered ${response.status}`);
      body = await response.text();
    } catch (error) {
      // keep the old labels, surface the failure
      this.lastSyncStatus = { added: 0, ok: false, error: String(error) };
      return this.lastSyncStatus;
    }
    let added = 0;
    let newest = this.settings.lastSync;
    for (const line of body.split("\n")) {
      if (!line.trim()) continue;
      let record: LabelRecord;
      try {
        record = JSON.parse(line) as LabelRecord;
      } catch {
        continue; // skip malformed lines, keep the rest
      }
      if (!record.key || typeof record.labeled_at !== "number") continue;
      this.cache.put(record, record.labeled_at);
      newest = Math.max(newest, record.labeled_at);
      added += 1;
    }
    this.settings.lastSync = newest;
    await this.persist();
    await this.persistLabels();
    this.lastSyncStatus = { added, ok: true };
    return this.lastSyncStatus;
  }

  // -- the request decision (synchronous, cache only, fail-open)

  onRequest(details: RequestDetails): BlockingResponse {
    let cancel = false;
    let category = "";
    try {
      if (details.type !== "script") return { cancel: false };
      const hit = this.cache.get(details.url);
      if (hit === null) {
        this.observe(details, UNASSIGNED, false);
        return { cancel: false }; // label miss: treat as critical
      }
      category = hit.record.category;
      cancel = this.isBlockable(category, details.pageOrigin);
    } catch {
      cancel = false; // fail open, always
    }
    this.observe(details, category || UNASSIGNED, cancel);
    return { cancel };
  }

  private isBlockable(category: string, pageOrigin: string | null): boolean {
    if (category === UNASSIGNED) return false;
    if (!this.settings.noncritical.includes(category as Category)) {
      return false;
    }
    if (pageOrigin) {
      const restored = this.settings.perPageOverrides[pageOrigin];
      if (restored && restored.includes(category as Category)) return false;
    }
    return true;
  }

  // -- per-page state for the popup

  private observe(
    details: RequestDetails,
    category: string,
    blocked: boolean,
  ): void {
    if (details.type !== "script" || !details.pageOrigin) return;
    let page = this.pages.get(details.pageOrigin);
    if (!page) {
      page = new Map();
      this.pages.set(details.pageOrigin, page);
    }
    page.set(details.url, { url: details.url, category, blocked });
  }

  pageReloaded(pageOrigin: string): void {
    this.pages.delete(pageOrigin);
  }

  popupState(pageOrigin: string): PopupItem[] {
    const page = this.pages.get(pageOrigin);
    if (!page) return [];
    return [...page.values()].map((observation) => ({
      url: observation.url,
      category: observation.category,
      blocked: observation.blocked,
      overridable:
        observation.category !== UNASSIGNED &&
        this.settings.noncritical.includes(observation.category as Category),
    }));
  }

  async setPageOverride(
    pageOrigin: string,
    category: Category,
    restore: boolean,
  ): Promise<void> {
    const current = new Set(this.settings.perPageOverrides[pageOrigin] ?? []);
    if (restore) current.add(category);
    else current.delete(category);
    if (current.size > 0) {
      this.settings.perPageOverrides[pageOrigin] = [...current];
    } else {
      delete this.settings.perPageOverrides[pageOrigin];
    }
    await this.persist();
  }

  // -- optional, consent-gated miss forwarding

  async classifyMiss(url: string): Promise<LabelRecord | null> {
    if (!this.settings.allowMissForwarding) return null;
    try {
      const response = await this.fetchImpl(
        `${this.settings.serviceUrl}/v1/classify`,
        {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({ url }),
        },
      );
      if (!response.ok) return null;
      const answer = (await response.json()) as {
        category: string;
        confidence: number;
      };
      const record: LabelRecord = {
        key: url,
        domain: new URL(url).hostname.toLowerCase(),
        category: answer.category as LabelRecord["category"],
        confidence: answer.confidence,
        labeled_at: Math.floor(Date.now() / 1000),
      };
      this.cache.put(record);
      await this.persistLabels();
      return record;
    } catch {
      return null;
    }
  }
}
