// Hash-routed single page app for the curation workflow.
//
// The server is the single source of truth: every action issues exactly
// one API call and then re-fetches whatever the current route needs, so
// a hard refresh always reproduces the same view.

import * as api from "./api.js";
import { ApiError, GlobalTagView, SuggestionView } from "./types.js";
import {
  renderLinkEditor,
  renderPortalList,
  renderQueue,
  renderTagDetail,
  renderTagSearch,
  el,
} from "./views.js";

interface LinkEditorState {
  tagName: string;
  query: string;
  results: GlobalTagView[];
  linkedTo: GlobalTagView[];
}

export class App {
  private root: HTMLElement;
  private notice = el("div", { id: "notice" });
  private view = el("div", { id: "view" });
  private tierFilter: number | undefined;
  private linkEditor: LinkEditorState | null = null;
  /** Last in-flight action; tests await this to settle the DOM. */
  lastTask: Promise<void> = Promise.resolve();

  private onHashChange = () => this.schedule(this.route());

  constructor(root: HTMLElement) {
    this.root = root;
    root.replaceChildren(
      el("nav", {}, [
        el("a", { href: "#/portals" }, ["Portals"]),
        " | ",
        el("a", { href: "#/tags" }, ["Global tags"]),
      ]),
      this.notice,
      this.view,
    );
    window.addEventListener("hashchange", this.onHashChange);
  }

  start(): Promise<void> {
    if (!window.location.hash) {
      window.location.hash = "#/portals";
    }
    this.schedule(this.route());
    return this.lastTask;
  }

  /** Detach from the window (used when remounting in tests). */
  stop(): void {
    window.removeEventListener("hashchange", this.onHashChange);
  }

  private schedule(task: Promise<void>): void {
    this.lastTask = task.catch((error) => {
      this.showNotice(`error: ${String(error)}`, "error");
    });
  }

  private showNotice(text: string, kind: "info" | "error" = "info"): void {
    this.notice.replaceChildren(el("p", { class: `notice-${kind}` }, [text]));
  }

  private clearNotice(): void {
    this.notice.replaceChildren();
  }

  // ----------------------------------------------------------------
  // routing

  async route(): Promise<void> {
    const hash = window.location.hash.replace(/^#/, "") || "/portals";
    const [, section, ...rest] = hash.split("/");
    this.linkEditor = null;
    if (section === "queue" && rest[0]) {
      await this.renderQueuePage(decodeURIComponent(rest[0]));
    } else if (section === "tags" && rest[0]) {
      await this.renderTagDetailPage(decodeURIComponent(rest[0]));
    } else if (section === "tags") {
      await this.renderTagSearchPage("");
    } else {
      await this.renderPortalsPage();
    }
  }

  private async renderPortalsPage(): Promise<void> {
    const portals = await api.listPortals();
    this.view.replaceChildren(renderPortalList(portals));
  }

  // ----------------------------------------------------------------
  // suggestion queue + local tag list

  private async renderQueuePage(portalId: string): Promise<void> {
    const [items, tags] = await Promise.all([
      api.suggestions(portalId, this.tierFilter),
      api.portalTags(portalId),
    ]);
    this.view.replaceChildren(
      renderQueue(portalId, items, tags, this.tierFilter, {
        onAccept: (s, survivor) =>
          this.schedule(this.accept(portalId, s, survivor)),
        onReject: (s) => this.schedule(this.reject(portalId, s)),
        onTierChange: (tier) => {
          this.tierFilter = tier;
          this.schedule(this.renderQueuePage(portalId));
        },
        onLinkRequest: (tagName) =>
          this.schedule(this.openLinkEditor(portalId, tagName)),
      }),
    );
    if (this.linkEditor) {
      this.mountLinkEditor(portalId);
    }
  }

  private async accept(
    portalId: string,
    suggestion: SuggestionView,
    survivor: string,
  ): Promise<void> {
    try {
      await api.acceptSuggestion(portalId, suggestion.suggestion_id, survivor);
      this.clearNotice();
      this.showNotice(`merged ${suggestion.members.length} tags into "${survivor}"`);
    } catch (error) {
      if (error instanceof ApiError && error.status === 410) {
        this.showNotice(
          "That suggestion went stale; the queue has been refreshed.",
          "error",
        );
      } else {
        throw error;
      }
    }
    await this.renderQueuePage(portalId);
  }

  private async reject(
    portalId: string,
    suggestion: SuggestionView,
  ): Promise<void> {
    try {
      await api.rejectSuggestion(portalId, suggestion.suggestion_id);
      this.showNotice("suggestion rejected");
    } catch (error) {
      if (error instanceof ApiError && error.status === 410) {
        this.showNotice(
          "That suggestion went stale; the queue has been refreshed.",
          "error",
        );
      } else {
        throw error;
      }
    }
    await this.renderQueuePage(portalId);
  }

  // ----------------------------------------------------------------
  // link editor (local tag -> global tag)

  private async openLinkEditor(portalId: string, tagName: string): Promise<void> {
    const linkedTo = await this.linkedGlobalTags(portalId, tagName);
    this.linkEditor = { tagName, query: "", results: [], linkedTo };
    this.mountLinkEditor(portalId);
  }

  /** Global tags already carrying a link for this (portal, tag name). */
  private async linkedGlobalTags(
    portalId: string,
    tagName: string,
  ): Promise<GlobalTagView[]> {
    const hits = await api.searchTags(tagName);
    return hits.tags.filter((tag) =>
      tag.local_links.some(
        (l) => l.portal_id === portalId && l.tag_name === tagName,
      ),
    );
  }

  private mountLinkEditor(portalId: string): void {
    const slot = this.view.querySelector("#link-editor-slot");
    const state = this.linkEditor;
    if (!slot || !state) {
      return;
    }
    slot.replaceChildren(
      renderLinkEditor(state.tagName, state.query, state.results, state.linkedTo, {
        onSearch: (query) => this.schedule(this.searchForLink(portalId, query)),
        onPick: (slug) => this.schedule(this.pickLink(portalId, slug)),
        onCreate: (label) => this.schedule(this.createForLink(portalId, label)),
      }),
    );
  }

  private async searchForLink(portalId: string, query: string): Promise<void> {
    const state = this.linkEditor;
    if (!state) return;
    state.query = query;
    state.results = query.trim() === "" ? [] : (await api.searchTags(query)).tags;
    this.mountLinkEditor(portalId);
  }

  private async pickLink(portalId: string, slug: string): Promise<void> {
    const state = this.linkEditor;
    if (!state) return;
    const before = await api.getTag(slug);
    const already = before.local_links.some(
      (l) => l.portal_id === portalId && l.tag_name === state.tagName,
    );
    await api.linkLocalTag(slug, portalId, state.tagName);
    this.showNotice(
      already
        ? `"${state.tagName}" was already linked to ${slug}; nothing changed`
        : `linked "${state.tagName}" to global tag ${slug}`,
    );
    this.linkEditor = null;
    await this.renderQueuePage(portalId);
  }

  private async createForLink(portalId: string, label: string): Promise<void> {
    const state = this.linkEditor;
    if (!state) return;
    const created = await api.createTag(label);
    this.showNotice(`created global tag ${created.slug}; click it to link`);
    state.query = created.slug;
    state.results = [created];
    this.mountLinkEditor(portalId);
  }

  // ----------------------------------------------------------------
  // global tag browser

  private async renderTagSearchPage(query: string): Promise<void> {
    const results = (await api.searchTags(query)).tags;
    this.view.replaceChildren(
      renderTagSearch(query, results, (q) =>
        this.schedule(this.renderTagSearchPage(q)),
      ),
    );
  }

  private async renderTagDetailPage(slug: string): Promise<void> {
    const tag = await api.getTag(slug);
    this.view.replaceChildren(renderTagDetail(tag));
  }
}

export function mount(root: HTMLElement): App {
  const app = new App(root);
  void app.start();
  return app;
}

declare global {
  interface Window {
    odtagsApp?: App;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  window.odtagsApp = mount(document.getElementById("app")!);
}
