// Extension behavior against the fixture service and a scripted page
// load. The last describe block is the acceptance scenario: default
// settings cancel exactly the advertising+analytics scripts, a per-page
// override brings one category back, and a second sync pulls nothing.

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { startBackground } from "../src/background.js";
import { ExtensionCore } from "../src/core.js";
import { MemoryStorage } from "../src/storage.js";
import { CATEGORIES, Category, LabelRecord } from "../src/types.js";
import {
  FakeWebRequest,
  FixtureService,
  label,
  loadPage,
  startFixtureService,
} from "./harness.js";

const PAGE = "http://site.test/page.html";
const PAGE_ORIGIN = "http://site.test";
const NOW = 1_700_000_000;

// the 23-script fixture page: 10 advertising, 8 analytics, 5 critical
function fixtureScripts(): { url: string; category: Category }[] {
  const scripts: { url: string; category: Category }[] = [];
  const plan: [Category, number][] = [
    ["advertising", 10],
    ["analytics", 8],
    ["utility", 2],
    ["content", 1],
    ["video", 1],
    ["hosting", 1],
  ];
  for (const [category, count] of plan) {
    for (let i = 0; i < count; i += 1) {
      scripts.push({
        url: `http://cdn${i}.${category}.test/${category}_${i}.js`,
        category,
      });
    }
  }
  return scripts;
}

function fixtureLabels(): LabelRecord[] {
  return fixtureScripts().map((script, i) =>
    label(script.url, script.category, NOW - 100 + i),
  );
}

function pageResources() {
  return fixtureScripts().map((script) => ({
    url: script.url,
    type: "script",
  }));
}

describe("label sync", () => {
  let service: FixtureService;

  afterEach(async () => {
    await service.close();
  });

  it("first sync pulls every entry, the immediate second pulls none", async () => {
    service = await startFixtureService([
      label("http://a.test/1.js", "analytics", NOW - 4),
      label("http://a.test/2.js", "analytics", NOW - 3),
      label("http://b.test/3.js", "advertising", NOW - 2),
      label("http://c.test/4.js", "video", NOW - 1),
      label("http://d.test/5.js", "utility", NOW),
    ]);
    const core = new ExtensionCore(new MemoryStorage(), fetch);
    core.settings.serviceUrl = service.baseUrl;

    expect((await core.syncLabels()).added).toBe(5);
    expect(core.settings.lastSync).toBe(NOW);
    expect((await core.syncLabels()).added).toBe(0);
    // the second pull really asked for strictly-newer entries
    expect(service.labelRequests[1]).toContain(`since=${NOW}`);
  });

  it("a later label arrives on the next pull", async () => {
    service = await startFixtureService([
      label("http://a.test/1.js", "analytics", NOW - 1),
    ]);
    const core = new ExtensionCore(new MemoryStorage(), fetch);
    core.settings.serviceUrl = service.baseUrl;
    await core.syncLabels();
    service.addLabel(label("http://a.test/new.js", "advertising", NOW + 5));
    expect((await core.syncLabels()).added).toBe(1);
  });

  it("network failure keeps old labels and surfaces the status", async () => {
    service = await startFixtureService([
      label("http://a.test/1.js", "analytics", NOW),
    ]);
    const core = new ExtensionCore(new MemoryStorage(), fetch);
    core.settings.serviceUrl = service.baseUrl;
    await core.syncLabels();
    core.settings.serviceUrl = "http://127.0.0.1:1"; // nothing listens here
    const result = await core.syncLabels();
    expect(result.ok).toBe(false);
    expect(core.cache.size).toBe(1);
    expect(core.lastSyncStatus.error).toBeTruthy();
  });

  it("sync past the cache cap evicts down to the budget", async () => {
    const many = Array.from({ length: 200 }, (_, i) =>
      label(`http://bulk.test/script-${i}.js`, "analytics", NOW - 500 + i),
    );
    service = await startFixtureService(many);
    const capacity = 4000; // far below 200 entries
    const core = new ExtensionCore(new MemoryStorage(), fetch, capacity);
    core.settings.serviceUrl = service.baseUrl;
    await core.syncLabels();
    expect(core.cacheBytesUsed).toBeLessThanOrEqual(capacity);
    expect(core.cache.size).toBeGreaterThan(0);
    expect(core.cache.size).toBeLessThan(200);
  });

  it("settings and labels survive a restart via storage", async () => {
    service = await startFixtureService([
      label("http://a.test/1.js", "analytics", NOW),
    ]);
    const storage = new MemoryStorage();
    const first = new ExtensionCore(storage, fetch);
    first.settings.serviceUrl = service.baseUrl;
    await first.syncLabels();
    await first.setPageOverride(PAGE_ORIGIN, "analytics", true);

    const second = new ExtensionCore(storage, fetch);
    await second.load();
    expect(second.settings.lastSync).toBe(NOW);
    expect(second.cache.size).toBe(1);
    expect(second.settings.perPageOverrides[PAGE_ORIGIN]).toEqual([
      "analytics",
    ]);
  });
});

describe("request decisions", () => {
  let core: ExtensionCore;

  beforeEach(async () => {
    core = new ExtensionCore(new MemoryStorage(), fetch);
    for (const record of fixtureLabels()) {
      core.cache.put(record, record.labeled_at);
    }
  });

  it("never cancels non-script requests", () => {
    for (const type of ["image", "stylesheet", "xmlhttprequest", "font"]) {
      const answer = core.onRequest({
        url: "http://cdn0.advertising.test/advertising_0.js",
        type,
        pageOrigin: PAGE_ORIGIN,
      });
      expect(answer.cancel).toBe(false);
    }
  });

  it("label miss loads the script", () => {
    const answer = core.onRequest({
      url: "http://unknown.test/mystery.js",
      type: "script",
      pageOrigin: PAGE_ORIGIN,
    });
    expect(answer.cancel).toBe(false);
  });

  it("unassigned labels are never blockable", () => {
    core.cache.put(label("http://odd.test/u.js", "unassigned", NOW));
    const answer = core.onRequest({
      url: "http://odd.test/u.js",
      type: "script",
      pageOrigin: PAGE_ORIGIN,
    });
    expect(answer.cancel).toBe(false);
  });

  it("domain consensus blocks unseen URLs on unanimous domains", () => {
    const answer = core.onRequest({
      url: "http://cdn0.advertising.test/brand-new.js",
      type: "script",
      pageOrigin: PAGE_ORIGIN,
    });
    expect(answer.cancel).toBe(true);
  });

  it("disabling every noncritical category is a pure pass-through", () => {
    core.settings.noncritical = [];
    for (const resource of pageResources()) {
      const answer = core.onRequest({ ...resource, pageOrigin: PAGE_ORIGIN });
      expect(answer.cancel).toBe(false);
    }
  });

  it("overrides apply only to their own origin", async () => {
    await core.setPageOverride(PAGE_ORIGIN, "analytics", true);
    const url = "http://cdn0.analytics.test/analytics_0.js";
    expect(
      core.onRequest({ url, type: "script", pageOrigin: PAGE_ORIGIN }).cancel,
    ).toBe(false);
    expect(
      core.onRequest({ url, type: "script", pageOrigin: "http://other.test" })
        .cancel,
    ).toBe(true);
  });
});

describe("acceptance: fixture page through the scripted harness", () => {
  let service: FixtureService;
  let webRequest: FakeWebRequest;
  let core: ExtensionCore;

  beforeEach(async () => {
    service = await startFixtureService(fixtureLabels());
    webRequest = new FakeWebRequest();
    core = await startBackground({
      storage: new MemoryStorage(),
      webRequest,
      fetchImpl: fetch,
      schedule: () => undefined, // tests drive sync explicitly
    });
    core.settings.serviceUrl = service.baseUrl;
    await core.syncLabels();
  });

  afterEach(async () => {
    await service.close();
  });

  it("default settings cancel exactly the advertising and analytics scripts", () => {
    const result = loadPage(webRequest, PAGE, pageResources());
    const byCategory = new Map(
      fixtureScripts().map((script) => [script.url, script.category]),
    );
    const cancelledCategories = new Set(
      result.cancelled.map((url) => byCategory.get(url)),
    );
    expect(result.cancelled).toHaveLength(18);
    expect(result.fetched).toHaveLength(5);
    expect(cancelledCategories).toEqual(new Set(["advertising", "analytics"]));
    for (const url of result.fetched) {
      expect(["utility", "content", "video", "hosting"]).toContain(
        byCategory.get(url),
      );
    }
  });

  it("popup lists 18 blocked of 23 and marks them overridable", () => {
    loadPage(webRequest, PAGE, pageResources());
    const items = core.popupState(PAGE_ORIGIN);
    expect(items).toHaveLength(23);
    const blocked = items.filter((item) => item.blocked);
    expect(blocked).toHaveLength(18);
    expect(blocked.every((item) => item.overridable)).toBe(true);
  });

  it("popup is empty for a page with no scripts", () => {
    loadPage(webRequest, "http://empty.test/", []);
    expect(core.popupState("http://empty.test")).toEqual([]);
  });

  it("per-page analytics override + reload fetches the analytics scripts", async () => {
    const before = loadPage(webRequest, PAGE, pageResources());
    expect(before.cancelled).toHaveLength(18);

    await core.setPageOverride(PAGE_ORIGIN, "analytics", true);
    core.pageReloaded(PAGE_ORIGIN);
    const after = loadPage(webRequest, PAGE, pageResources());

    expect(after.cancelled).toHaveLength(10); // advertising only
    const analytics = fixtureScripts()
      .filter((script) => script.category === "analytics")
      .map((script) => script.url);
    for (const url of analytics) {
      expect(after.fetched).toContain(url);
    }
    // and the popup now shows those entries as not blocked
    const items = core.popupState(PAGE_ORIGIN);
    const analyticsItems = items.filter((item) =>
      analytics.includes(item.url),
    );
    expect(analyticsItems.every((item) => !item.blocked)).toBe(true);
  });

  it("second sync after the page load still pulls 0 new entries", async () => {
    loadPage(webRequest, PAGE, pageResources());
    expect((await core.syncLabels()).added).toBe(0);
  });
});

describe("miss forwarding consent", () => {
  it("is off by default and works when enabled", async () => {
    const service = await startFixtureService([], {
      category: "social",
      confidence: 0.8,
    });
    try {
      const core = new ExtensionCore(new MemoryStorage(), fetch);
      core.settings.serviceUrl = service.baseUrl;
      expect(await core.classifyMiss("http://new.test/x.js")).toBeNull();
      core.settings.allowMissForwarding = true;
      const record = await core.classifyMiss("http://new.test/x.js");
      expect(record?.category).toBe("social");
      expect(core.cache.get("http://new.test/x.js")).not.toBeNull();
    } finally {
      await service.close();
    }
  });
});

describe("category constants", () => {
  it("mirror the service's eight categories", () => {
    expect(CATEGORIES).toHaveLength(8);
    expect(new Set(CATEGORIES).size).toBe(8);
  });
});
