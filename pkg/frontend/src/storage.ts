// Minimal async key-value surface. The browser build binds this to
// chrome.storage.local; tests use the in-memory implementation.

export interface StorageArea {
  get(key: string): Promise<unknown | undefined>;
  set(key: string, value: unknown): Promise<void>;
}

export class MemoryStorage implements StorageArea {
  private data = new Map<string, unknown>();

  async get(key: string): Promise<unknown | undefined> {
    return this.data.get(key);
  }

  async set(key: string, value: unknown): Promise<void> {
    // structured clone keeps the semantics of real extension storage:
    // values round-trip through serialization
    this.data.set(key, JSON.parse(JSON.stringify(value)));
  }
}
