// DOM builders. Pure: data in, elements out; handlers are passed in by
// the app so views stay testable and hold no state of their own.

import {
  GlobalTagView,
  LocalTagRow,
  PortalInfo,
  SuggestionView,
} from "./types.js";
import { tagTurtleUrl } from "./api.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function renderPortalList(portals: PortalInfo[]): HTMLElement {
  const rows = portals.map((p) =>
    el("tr", { "data-portal": p.portal_id }, [
      el("td", {}, [el("a", { href: `#/queue/${p.portal_id}` }, [p.portal_id])]),
      el("td", {}, [p.locale]),
      el("td", {}, [String(p.dataset_count)]),
      el("td", {}, [String(p.tag_count)]),
    ]),
  );
  return el("section", { class: "portals" }, [
    el("h2", {}, ["Portals"]),
    el("table", {}, [
      el("thead", {}, [
        el("tr", {}, [
          el("th", {}, ["portal"]),
          el("th", {}, ["locale"]),
          el("th", {}, ["datasets"]),
          el("th", {}, ["tags"]),
        ]),
      ]),
      el("tbody", {}, rows),
    ]),
  ]);
}

export interface QueueHandlers {
  onAccept: (suggestion: SuggestionView, survivor: string) => void;
  onReject: (suggestion: SuggestionView) => void;
  onTierChange: (tier: number | undefined) => void;
  onLinkRequest: (tagName: string) => void;
}

function suggestionRow(
  suggestion: SuggestionView,
  handlers: QueueHandlers,
): HTMLElement {
  const survivorSelect = el("select", { class: "survivor-select" });
  for (const member of suggestion.members) {
    const option = el("option", { value: member.name }, [member.name]);
    if (member.name === suggestion.proposed_survivor) {
      option.selected = true;
    }
    survivorSelect.append(option);
  }
  const evidence = Object.entries(suggestion.evidence)
    .map(([k, v]) => `${k}=${v}`)
    .join(" ");
  const accept = el("button", { class: "accept" }, ["Accept"]);
  accept.addEventListener("click", () =>
    handlers.onAccept(suggestion, survivorSelect.value),
  );
  const reject = el("button", { class: "reject" }, ["Reject"]);
  reject.addEventListener("click", () => handlers.onReject(suggestion));
  return el(
    "li",
    { class: "suggestion", "data-sid": suggestion.suggestion_id },
    [
      el("span", { class: `badge tier-${suggestion.tier}` }, [
        `tier ${suggestion.tier} · ${suggestion.confidence}`,
      ]),
      el(
        "span",
        { class: "members" },
        suggestion.members.map((m) =>
          el("span", { class: "member", "data-name": m.name }, [
            `${m.name} (${m.usage_count} uses, ${m.datasets.length} datasets)`,
          ]),
        ),
      ),
      el("span", { class: "evidence" }, [evidence]),
      el("label", {}, ["survivor: ", survivorSelect]),
      accept,
      reject,
    ],
  );
}

export function renderQueue(
  portalId: string,
  items: SuggestionView[],
  tags: LocalTagRow[],
  tierFilter: number | undefined,
  handlers: QueueHandlers,
): HTMLElement {
  const tierSelect = el("select", { id: "tier-filter" });
  for (const [value, label] of [
    ["", "all tiers"],
    ["1", "tier 1"],
    ["2", "tier 2"],
    ["3", "tier 3"],
  ] as const) {
    const option = el("option", { value }, [label]);
    if (value === (tierFilter ? String(tierFilter) : "")) {
      option.selected = true;
    }
    tierSelect.append(option);
  }
  tierSelect.addEventListener("change", () => {
    handlers.onTierChange(tierSelect.value ? Number(tierSelect.value) : undefined);
  });

  const queue =
    items.length === 0
      ? el("p", { class: "empty-state", id: "queue-empty" }, [
          "No pending suggestions.",
        ])
      : el(
          "ul",
          { id: "suggestion-list" },
          items.map((s) => suggestionRow(s, handlers)),
        );

  const tagRows = tags.map((t) => {
    const link = el("button", { class: "link-tag" }, ["Link"]);
    link.addEventListener("click", () => handlers.onLinkRequest(t.name));
    return el("li", { class: "local-tag", "data-tag": t.name }, [
      el("span", { class: "tag-name" }, [t.name]),
      el("span", { class: "tag-usage" }, [` ${t.usage_count} uses `]),
      link,
    ]);
  });

  return el("section", { class: "queue" }, [
    el("h2", {}, [`Suggestions for ${portalId}`]),
    el("label", {}, ["show: ", tierSelect]),
    queue,
    el("div", { id: "link-editor-slot" }),
    el("h3", {}, ["Local tags"]),
    el("ul", { id: "tag-list" }, tagRows),
  ]);
}

export interface LinkEditorHandlers {
  onSearch: (query: string) => void;
  onPick: (slug: string) => void;
  onCreate: (label: string) => void;
}

export function renderLinkEditor(
  tagName: string,
  query: string,
  results: GlobalTagView[],
  linkedTo: GlobalTagView[],
  handlers: LinkEditorHandlers,
): HTMLElement {
  const input = el("input", {
    id: "link-search",
    value: query,
    placeholder: "search global tags",
  });
  input.addEventListener("input", () => handlers.onSearch(input.value));
  const linkedState =
    linkedTo.length === 0
      ? el("p", { id: "linked-state", class: "empty-state" }, [
          "Not linked to any global tag yet.",
        ])
      : el("p", { id: "linked-state" }, [
          "Currently linked to: ",
          ...linkedTo.flatMap((tag, i) => {
            const anchor = el("a", { href: `#/tags/${tag.slug}` }, [tag.slug]);
            return i ? [", ", anchor] : [anchor];
          }),
        ]);
  const children: (Node | string)[] = [
    el("h4", {}, [`Link local tag "${tagName}"`]),
    linkedState,
    input,
  ];
  if (results.length > 0) {
    children.push(
      el(
        "ul",
        { id: "link-results" },
        results.map((tag) => {
          const pick = el("button", { class: "pick", "data-slug": tag.slug }, [
            `${tag.label} (${tag.slug})`,
          ]);
          pick.addEventListener("click", () => handlers.onPick(tag.slug));
          return el("li", {}, [pick]);
        }),
      ),
    );
  } else if (query.trim() !== "") {
    const create = el("button", { id: "create-global" }, [
      `No match. Create global tag "${tagName}"`,
    ]);
    create.addEventListener("click", () => handlers.onCreate(tagName));
    children.push(el("p", { class: "empty-state" }, ["No matching global tags."]));
    children.push(create);
  }
  return el("div", { id: "link-editor", "data-tag": tagName }, children);
}

export function renderTagSearch(
  query: string,
  results: GlobalTagView[],
  onSearch: (q: string) => void,
): HTMLElement {
  const input = el("input", { id: "tag-search", value: query });
  input.addEventListener("input", () => onSearch(input.value));
  const list = el(
    "ul",
    { id: "tag-search-results" },
    results.map((tag) =>
      el("li", {}, [
        el("a", { href: `#/tags/${tag.slug}`, "data-slug": tag.slug }, [
          `${tag.label} (${tag.slug})`,
        ]),
      ]),
    ),
  );
  return el("section", { class: "tag-search" }, [
    el("h2", {}, ["Global tags"]),
    input,
    results.length ? list : el("p", { class: "empty-state" }, ["No tags found."]),
  ]);
}

export function renderTagDetail(tag: GlobalTagView): HTMLElement {
  const meanings =
    tag.meanings.length === 0
      ? el("p", { class: "empty-state" }, ["No meanings recorded."])
      : el(
          "ul",
          { id: "meanings" },
          tag.meanings.map((iri) =>
            el("li", {}, [el("a", { href: iri }, [iri])]),
          ),
        );
  const relations =
    tag.relations.length === 0
      ? el("p", { class: "empty-state", id: "relations-empty" }, [
          "No relations.",
        ])
      : el(
          "ul",
          { id: "relations" },
          tag.relations.map((rel) =>
            el("li", { class: `relation ${rel.kind}` }, [
              `${rel.kind}: `,
              el("a", { href: `#/tags/${rel.target}`, "data-rel": rel.kind }, [
                rel.target,
              ]),
            ]),
          ),
        );
  const byPortal = new Map<string, string[]>();
  for (const link of tag.local_links) {
    const names = byPortal.get(link.portal_id) ?? [];
    names.push(link.tag_name);
    byPortal.set(link.portal_id, names);
  }
  const links =
    byPortal.size === 0
      ? el("p", { class: "empty-state" }, ["No local tags linked yet."])
      : el(
          "ul",
          { id: "local-links" },
          [...byPortal.entries()].map(([portal, names]) =>
            el("li", { "data-portal": portal }, [
              `${portal}: ${names.sort().join(", ")}`,
            ]),
          ),
        );
  return el("section", { class: "tag-detail", "data-slug": tag.slug }, [
    el("h2", {}, [tag.label, " ", el("code", {}, [tag.slug])]),
    el("h3", {}, ["Meanings"]),
    meanings,
    el("h3", {}, ["Relations"]),
    relations,
    el("h3", {}, ["Linked local tags"]),
    links,
    el("a", { id: "rdf-download", href: tagTurtleUrl(tag.slug) }, [
      "Download RDF",
    ]),
  ]);
}
