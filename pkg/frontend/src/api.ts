// Thin typed client over fetch. One function per endpoint; no caching,
// no optimistic state.

import {
  ApiError,
  GlobalTagView,
  LocalTagRow,
  PortalInfo,
  SuggestionView,
  TagSearchResult,
} from "./types.js";

const BASE = "/api/v1";

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(`${BASE}${path}`, init);
  const text = await response.text();
  if (!response.ok) {
    let detail = text;
    try {
      detail = JSON.parse(text).detail ?? text;
    } catch {
      // non-JSON error body; keep raw text
    }
    throw new ApiError(response.status, String(detail));
  }
  return JSON.parse(text) as T;
}

function post<T>(path: string, body: unknown): Promise<T> {
  return request<T>(path, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
}

export async function listPortals(): Promise<PortalInfo[]> {
  const data = await request<{ portals: PortalInfo[] }>("/portals");
  return data.portals;
}

export async function portalTags(portalId: string): Promise<LocalTagRow[]> {
  const data = await request<{ tags: LocalTagRow[] }>(
    `/portals/${encodeURIComponent(portalId)}/tags`,
  );
  return data.tags;
}

export async function suggestions(
  portalId: string,
  tier?: number,
): Promise<SuggestionView[]> {
  const query = tier ? `?tier=${tier}` : "";
  const data = await request<{ suggestions: SuggestionView[] }>(
    `/portals/${encodeURIComponent(portalId)}/suggestions${query}`,
  );
  return data.suggestions;
}

export function acceptSuggestion(
  portalId: string,
  suggestionId: string,
  survivor: string,
): Promise<{ applied: boolean; tag_count: number }> {
  return post(
    `/portals/${encodeURIComponent(portalId)}/suggestions/${suggestionId}/accept`,
    { survivor },
  );
}

export function rejectSuggestion(
  portalId: string,
  suggestionId: string,
): Promise<{ rejected: string }> {
  return post(
    `/portals/${encodeURIComponent(portalId)}/suggestions/${suggestionId}/reject`,
    {},
  );
}

export function searchTags(query: string, page = 1): Promise<TagSearchResult> {
  const q = encodeURIComponent(query);
  return request<TagSearchResult>(`/tags?q=${q}&page=${page}`);
}

export function getTag(slug: string): Promise<GlobalTagView> {
  return request<GlobalTagView>(`/tags/${encodeURIComponent(slug)}`);
}

export function createTag(
  label: string,
  meanings: string[] = [],
): Promise<GlobalTagView> {
  return post("/tags", { label, meanings });
}

export function linkLocalTag(
  slug: string,
  portalId: string,
  tagName: string,
): Promise<GlobalTagView> {
  return post(`/tags/${encodeURIComponent(slug)}/links`, {
    portal_id: portalId,
    tag_name: tagName,
  });
}

export function tagTurtleUrl(slug: string): string {
  return `${BASE}/tags/${encodeURIComponent(slug)}.ttl`;
}
