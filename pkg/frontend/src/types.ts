// Server payload shapes. These mirror the /api/v1 contract exactly and
// are never mutated client-side: every view is a projection of a fresh
// server response.

export interface PortalInfo {
  portal_id: string;
  base_url: string;
  locale: string;
  dataset_count: number;
  tag_count: number;
}

export interface SuggestionMember {
  name: string;
  usage_count: number;
  datasets: string[];
}

export interface SuggestionView {
  suggestion_id: string;
  tier: 1 | 2 | 3;
  confidence: string;
  members: SuggestionMember[];
  proposed_survivor: string;
  evidence: Record<string, string>;
  status: string;
}

export interface LocalTagRow {
  name: string;
  usage_count: number;
  origin: string;
}

export interface TagRelation {
  kind: "broader" | "narrower" | "related" | "sameAs";
  target: string;
}

export interface LocalLink {
  portal_id: string;
  tag_name: string;
}

export interface GlobalTagView {
  slug: string;
  label: string;
  meanings: string[];
  relations: TagRelation[];
  local_links: LocalLink[];
  created_at: string;
  updated_at: string;
}

export interface TagSearchResult {
  total: number;
  page: number;
  page_size: number;
  tags: GlobalTagView[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}
