// Thin binding between the engine and a webRequest-shaped browser API.
// Structural types keep this file loadable both in a browser build (pass
// chrome.webRequest / chrome.storage.local adapters) and in the test
// harness (pass fakes).

import { ExtensionCore } from "./core.js";
import { StorageArea } from "./storage.js";
import { BlockingResponse, RequestDetails } from "./types.js";

export interface WebRequestApi {
  onBeforeRequest(
    listener: (details: {
      url: string;
      type: string;
      initiator?: string;
      documentUrl?: string;
    }) => BlockingResponse,
  ): void;
}

export interface BackgroundOptions {
  storage: StorageArea;
  webRequest: WebRequestApi;
  fetchImpl?: typeof fetch;
  syncPeriodSeconds?: number;
  cacheCapacityBytes?: number;
  schedule?: (callback: () => void, seconds: number) => void;
}

function originOf(url: string | undefined): string | null {
  if (!url) return null;
  try {
    return new URL(url).origin;
  } catch {
    return null;
  }
}

export async function startBackground(
  options: BackgroundOptions,
): Promise<ExtensionCore> {
  const core = new ExtensionCore(
    options.storage,
    options.fetchImpl ?? fetch,
    options.cacheCapacityBytes,
  );
  await core.load();

  options.webRequest.onBeforeRequest((details) => {
    const request: RequestDetails = {
      url: details.url,
      type: details.type,
      pageOrigin: originOf(details.initiator ?? details.documentUrl),
    };
    return core.onRequest(request);
  });

  const period = options.syncPeriodSeconds ?? 15 * 60;
  const schedule =
    options.schedule ??
    ((callback: () => void, seconds: number) =>
      setInterval(callback, seconds * 1000));
  void core.syncLabels();
  schedule(() => void core.syncLabels(), period);
  return core;
}
