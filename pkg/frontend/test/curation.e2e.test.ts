// End-to-end curation flows against the in-memory fixture server: the
// queue review loop, stale handling, the link editor, and the global
// tag browser. Views are asserted through the DOM exactly as a curator
// would see them.

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { App } from "../src/app.js";
import { FixtureServer } from "./fixtureServer.js";

let server: FixtureServer;
let app: App | null = null;

async function mountApp(hash: string): Promise<App> {
  if (app) app.stop();
  window.location.hash = hash;
  // let jsdom dispatch the queued hashchange while no app is attached
  await new Promise((resolve) => setTimeout(resolve, 0));
  document.body.innerHTML = '<div id="app"></div>';
  app = new App(document.getElementById("app")!);
  await app.start();
  return app;
}

async function settle(): Promise<void> {
  await app!.lastTask;
  await new Promise((resolve) => setTimeout(resolve, 0));
  await app!.lastTask;
}

function queueRows(): HTMLElement[] {
  return [...document.querySelectorAll<HTMLElement>("li.suggestion")];
}

function tagListNames(): string[] {
  return [...document.querySelectorAll<HTMLElement>("li.local-tag")].map(
    (li) => li.dataset.tag!,
  );
}

function click(element: Element | null): void {
  expect(element, "expected element to exist").not.toBeNull();
  (element as HTMLElement).dispatchEvent(
    new MouseEvent("click", { bubbles: true }),
  );
}

beforeEach(() => {
  server = new FixtureServer();
  globalThis.fetch = server.fetch as typeof fetch;
});

afterEach(() => {
  if (app) {
    app.stop();
    app = null;
  }
});

describe("suggestion queue", () => {
  it("renders two tier-1 and one tier-2 suggestion with badges", async () => {
    await mountApp("#/queue/demo");
    const rows = queueRows();
    expect(rows).toHaveLength(3);
    const badges = rows.map(
      (r) => r.querySelector(".badge")!.textContent ?? "",
    );
    expect(badges.filter((b) => b.startsWith("tier 1"))).toHaveLength(2);
    expect(badges.filter((b) => b.startsWith("tier 2"))).toHaveLength(1);
    expect(badges.join(" ")).toContain("high");
  });

  it("filters by tier", async () => {
    await mountApp("#/queue/demo");
    const filter = document.querySelector<HTMLSelectElement>("#tier-filter")!;
    filter.value = "2";
    filter.dispatchEvent(new Event("change", { bubbles: true }));
    await settle();
    expect(queueRows()).toHaveLength(1);
    expect(queueRows()[0]!.querySelector(".badge")!.textContent).toContain(
      "tier 2",
    );
  });

  it("accept merges, shrinks the queue, and updates the tag list", async () => {
    await mountApp("#/queue/demo");
    expect(tagListNames()).toContain("Budget");
    const row = queueRows().find((r) =>
      r.textContent!.includes("Budget"),
    )!;
    const callsBefore = server.log.filter((l) => l.startsWith("POST")).length;
    click(row.querySelector("button.accept"));
    await settle();
    expect(server.log.filter((l) => l.startsWith("POST"))).toHaveLength(
      callsBefore + 1,
    );
    expect(queueRows()).toHaveLength(2);
    expect(tagListNames()).not.toContain("Budget");
    expect(tagListNames()).toContain("budget");
    expect(document.querySelector("#notice")!.textContent).toContain("merged");
  });

  it("accept honors the survivor chosen in the dropdown", async () => {
    await mountApp("#/queue/demo");
    const row = queueRows().find((r) => r.textContent!.includes("Budget"))!;
    const select = row.querySelector<HTMLSelectElement>(".survivor-select")!;
    select.value = "Budget";
    click(row.querySelector("button.accept"));
    await settle();
    expect(tagListNames()).toContain("Budget");
    expect(tagListNames()).not.toContain("budget");
  });

  it("reject removes the row and persists across a hard refresh", async () => {
    await mountApp("#/queue/demo");
    const row = queueRows().find((r) => r.textContent!.includes("worker"))!;
    click(row.querySelector("button.reject"));
    await settle();
    expect(queueRows()).toHaveLength(2);
    // hard refresh: fresh app over the same server state
    await mountApp("#/queue/demo");
    expect(queueRows()).toHaveLength(2);
    expect(
      queueRows().every((r) => !r.textContent!.includes("worker (")),
    ).toBe(true);
    // the tags themselves are untouched by a rejection
    expect(tagListNames()).toContain("worker");
    expect(tagListNames()).toContain("workers");
  });

  it("a stale accept answers 410, shows a notice, and refreshes the queue", async () => {
    await mountApp("#/queue/demo");
    const row = queueRows().find((r) => r.textContent!.includes("Budget"))!;
    // the snapshot changes behind the UI's back (e.g. a CLI merge)
    const portal = server.portals.get("demo")!;
    server.applyMerge(portal, ["Budget", "budget"], "budget");
    click(row.querySelector("button.accept"));
    await settle();
    expect(document.querySelector("#notice")!.textContent).toContain("stale");
    expect(queueRows()).toHaveLength(2);
    expect(tagListNames()).not.toContain("Budget");
  });

  it("shows an explicit empty state once everything is resolved", async () => {
    await mountApp("#/queue/demo");
    while (queueRows().length > 0) {
      click(queueRows()[0]!.querySelector("button.accept"));
      await settle();
    }
    expect(document.querySelector("#queue-empty")!.textContent).toContain(
      "No pending suggestions",
    );
  });
});

describe("link editor", () => {
  async function openEditorFor(tag: string): Promise<void> {
    const row = [...document.querySelectorAll<HTMLElement>("li.local-tag")].find(
      (li) => li.dataset.tag === tag,
    )!;
    click(row.querySelector("button.link-tag"));
    await settle();
  }

  async function searchFor(text: string): Promise<void> {
    const input = document.querySelector<HTMLInputElement>("#link-search")!;
    input.value = text;
    input.dispatchEvent(new Event("input", { bubbles: true }));
    await settle();
  }

  it("search-as-you-type, pick, and the link shows up in both views", async () => {
    await mountApp("#/queue/demo");
    await openEditorFor("alimentos");
    await searchFor("foo");
    const pick = document.querySelector<HTMLElement>(
      '#link-results button.pick[data-slug="food"]',
    );
    const postsBefore = server.log.filter((l) => l.startsWith("POST")).length;
    click(pick);
    await settle();
    expect(
      server.log.filter((l) => l.startsWith("POST")),
    ).toHaveLength(postsBefore + 1);
    expect(document.querySelector("#notice")!.textContent).toContain(
      'linked "alimentos" to global tag food',
    );
    // reopening the link editor shows the existing link
    await openEditorFor("alimentos");
    expect(document.querySelector("#linked-state")!.textContent).toContain(
      "food",
    );
    // and the global tag browser shows it too
    window.location.hash = "#/tags/food";
    await app!.route();
    const links = document.querySelector("#local-links")!;
    expect(links.textContent).toContain("demo: alimentos");
  });

  it("linking twice is a visible no-op", async () => {
    await mountApp("#/queue/demo");
    for (const round of [1, 2]) {
      await openEditorFor("alimentos");
      await searchFor("food");
      click(
        document.querySelector('#link-results button.pick[data-slug="food"]'),
      );
      await settle();
      if (round === 2) {
        expect(document.querySelector("#notice")!.textContent).toContain(
          "already linked",
        );
      }
    }
    expect(server.tags.get("food")!.links).toHaveLength(1);
  });

  it("no hits offers the create-global-tag flow", async () => {
    await mountApp("#/queue/demo");
    await openEditorFor("transporte");
    await searchFor("transporte");
    expect(document.querySelector("#link-results")).toBeNull();
    const create = document.querySelector("#create-global")!;
    click(create);
    await settle();
    expect(server.tags.has("transporte")).toBe(true);
    // the freshly created tag is offered for linking; picking it links
    click(
      document.querySelector('#link-results button.pick[data-slug="transporte"]'),
    );
    await settle();
    expect(server.tags.get("transporte")!.links).toEqual([
      { portal_id: "demo", tag_name: "transporte" },
    ]);
  });
});

describe("global tag browser", () => {
  it("renders meanings, relations, and the RDF download", async () => {
    await mountApp("#/tags/budget");
    expect(document.querySelector(".tag-detail")!.getAttribute("data-slug")).toBe(
      "budget",
    );
    expect(document.querySelector("#meanings")!.textContent).toContain(
      "dbpedia.org/resource/Budget",
    );
    const broader = document.querySelector<HTMLAnchorElement>(
      '#relations a[data-rel="broader"]',
    )!;
    expect(broader.getAttribute("href")).toBe("#/tags/finance");
  });

  it("broader and narrower are navigable in both directions", async () => {
    await mountApp("#/tags/budget");
    window.location.hash = "#/tags/finance";
    await app!.route();
    const narrower = document.querySelector<HTMLAnchorElement>(
      '#relations a[data-rel="narrower"]',
    )!;
    expect(narrower.getAttribute("href")).toBe("#/tags/budget");
    window.location.hash = "#/tags/budget";
    await app!.route();
    expect(
      document.querySelector('#relations a[data-rel="broader"]'),
    ).not.toBeNull();
  });

  it("a tag without relations shows the empty state", async () => {
    await mountApp("#/tags/lonely");
    expect(document.querySelector("#relations-empty")!.textContent).toContain(
      "No relations",
    );
  });

  it("the download link points at the turtle endpoint and matches a direct fetch", async () => {
    await mountApp("#/tags/budget");
    const href = document
      .querySelector<HTMLAnchorElement>("#rdf-download")!
      .getAttribute("href")!;
    expect(href).toBe("/api/v1/tags/budget.ttl");
    const viaLink = await (await server.fetch(href)).text();
    const direct = await (await server.fetch("/api/v1/tags/budget.ttl")).text();
    expect(viaLink).toBe(direct);
    expect(viaLink).toContain("muto:Tag");
  });

  it("search page lists and navigates", async () => {
    await mountApp("#/tags");
    const input = document.querySelector<HTMLInputElement>("#tag-search")!;
    input.value = "budg";
    input.dispatchEvent(new Event("input", { bubbles: true }));
    await settle();
    const hit = document.querySelector<HTMLAnchorElement>(
      '#tag-search-results a[data-slug="budget"]',
    );
    expect(hit).not.toBeNull();
  });
});

describe("server remains the single source of truth", () => {
  it("hard refresh after a mixed session reproduces every view", async () => {
    // do a bit of everything
    await mountApp("#/queue/demo");
    click(
      queueRows()
        .find((r) => r.textContent!.includes("Budget"))!
        .querySelector("button.accept"),
    );
    await settle();
    const queueHtmlBefore = document.querySelector("#view")!.innerHTML;

    await mountApp("#/queue/demo");
    expect(document.querySelector("#view")!.innerHTML).toBe(queueHtmlBefore);

    await mountApp("#/tags/budget");
    const detailBefore = document.querySelector("#view")!.innerHTML;
    await mountApp("#/tags/budget");
    expect(document.querySelector("#view")!.innerHTML).toBe(detailBefore);
  });
});
