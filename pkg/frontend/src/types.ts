// Shared types for the label-blocking extension core.

export const CATEGORIES = [
  "advertising",
  "analytics",
  "social",
  "video",
  "customer_success",
  "utility",
  "hosting",
  "content",
] as const;

export type Category = (typeof CATEGORIES)[number];

export const UNASSIGNED = "unassigned";
export type Label = Category | typeof UNASSIGNED;

export function isCategory(value: string): value is Category {
  return (CATEGORIES as readonly string[]).includes(value);
}

// One line of the service's label snapshot (/v1/labels NDJSON).
export interface LabelRecord {
  key: string;
  domain: string;
  category: Label;
  confidence: number;
  labeled_at: number;
}

// Local label cache budget, matching the service-side store cap.
export const CACHE_CAPACITY_BYTES = 50 * 2 ** 20;

export interface ClientSettings {
  serviceUrl: string;
  // categories the user allows the extension to block
  noncritical: Category[];
  // page origin -> categories re-enabled (critical again) on that page
  perPageOverrides: Record<string, Category[]>;
  lastSync: number;
  // consent toggle for forwarding label misses to /v1/classify
  allowMissForwarding: boolean;
}

export const DEFAULT_SETTINGS: ClientSettings = {
  serviceUrl: "http://127.0.0.1:8300",
  noncritical: ["advertising", "analytics"],
  perPageOverrides: {},
  lastSync: 0,
  allowMissForwarding: false,
};

// The subset of webRequest details the decision needs.
export interface RequestDetails {
  url: string;
  type: string; // "script", "image", ...
  pageOrigin: string | null;
}

export interface BlockingResponse {
  cancel: boolean;
}
