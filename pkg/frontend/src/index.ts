export * from "./types.js";
export { LabelCache } from "./labelCache.js";
export { MemoryStorage } from "./storage.js";
export type { StorageArea } from "./storage.js";
export { ExtensionCore } from "./core.js";
export type { PopupItem, SyncResult } from "./core.js";
export { startBackground } from "./background.js";
export type { BackgroundOptions, WebRequestApi } from "./background.js";
export { renderPopup, summarize } from "./popup.js";
