/** Resource cards: five icons in fixed order, preview, and tag chips. */

import { escapeHtml, formatFit, formatRating, formatStars, renderRichText } from "../format";
import type { ResourceCard, Topic } from "../types";

// icon order is part of the contract: fit, effectiveness, difficulty,
// attempts, comments
export const CARD_ICONS = ["fit", "effectiveness", "difficulty", "attempts", "comments"] as const;

export const renderCard = (card: ResourceCard, topicNames: Map<string, string>): string => {
  const icons = [
    `<span class="icon icon-fit" title="personal fit">◎ ${formatFit(card.personal_fit)}</span>`,
    `<span class="icon icon-effectiveness" title="effectiveness">${formatStars(card.quality)}</span>`,
    `<span class="icon icon-difficulty" title="difficulty">⚖ ${formatRating(card.difficulty)}</span>`,
    `<span class="icon icon-attempts" title="times attempted">✍ ${card.attempts_count}</span>`,
    `<span class="icon icon-comments" title="comments">\u{1F5E8} ${card.comments_count}</span>`,
  ].join("");
  const chips = card.tags
    .map((t) => `<span class="chip">${escapeHtml(topicNames.get(t) ?? t)}</span>`)
    .join("");
  const deleted = card.status === "deleted" ? `<span class="deleted-note">deleted</span>` : "";
  return `
  <article class="resource-card" data-resource="${escapeHtml(card.resource_id)}">
    <a class="card-link" href="#/resource/${escapeHtml(card.resource_id)}">
      <div class="card-preview">${renderRichText(card.body_preview)}</div>
    </a>
    <div class="card-meta">
      <span class="kind-label">${escapeHtml(card.kind)}</span>${deleted}
      <div class="chips">${chips}</div>
    </div>
    <aside class="card-icons">${icons}</aside>
  </article>`;
};

/** Renders cards in the exact order received; ordering belongs to the API. */
export const renderCardList = (cards: ResourceCard[], topics: Topic[]): string => {
  const names = new Map(topics.map((t) => [t.id, t.name]));
  if (cards.length === 0) {
    return `<div class="empty-state">No resources match the current filters.</div>`;
  }
  return `<div class="card-list">${cards.map((c) => renderCard(c, names)).join("")}</div>`;
};

const KIND_OPTIONS = [
  ["mcq", "Questions"],
  ["worked_example", "Worked examples"],
  ["note", "Notes"],
] as const;

const STATUS_OPTIONS = [
  ["attempted", "Previously attempted"],
  ["not_attempted", "Not attempted"],
  ["incorrectly_answered", "Incorrectly answered"],
  ["own_deleted", "My deleted resources"],
] as const;

const SORT_OPTIONS = [
  ["recommended", "Recommended"],
  ["difficulty", "Difficulty"],
  ["quality", "Quality"],
  ["responses", "Responses"],
] as const;

export interface FilterState {
  kinds: Set<string>;
  topics: Set<string>;
  status_filter: Set<string>;
  keywords: string;
  sort_key: string;
}

/** Filter panel mirroring the search query fields one-to-one. */
export const renderFilterPanel = (topics: Topic[], state: FilterState): string => {
  const kindBoxes = KIND_OPTIONS.map(
    ([value, label]) => `
      <label><input type="checkbox" name="kinds" value="${value}"
        ${state.kinds.has(value) ? "checked" : ""}> ${label}</label>`,
  ).join("");
  const topicBoxes = topics
    .map(
      (t) => `
      <label><input type="checkbox" name="topics" value="${escapeHtml(t.id)}"
        ${state.topics.has(t.id) ? "checked" : ""}> ${escapeHtml(t.name)}</label>`,
    )
    .join("");
  const statusBoxes = STATUS_OPTIONS.map(
    ([value, label]) => `
      <label><input type="checkbox" name="status_filter" value="${value}"
        ${state.status_filter.has(value) ? "checked" : ""}> ${label}</label>`,
  ).join("");
  const sortOptions = SORT_OPTIONS.map(
    ([value, label]) =>
      `<option value="${value}"${state.sort_key === value ? " selected" : ""}>${label}</option>`,
  ).join("");
  return `
  <form id="filter-panel" class="filter-panel">
    <fieldset><legend>Filter Types &amp; Topics</legend>
      <div class="filter-group">${kindBoxes}</div>
      <div class="filter-group">${topicBoxes}</div>
    </fieldset>
    <fieldset><legend>Filter Resources</legend>
      <div class="filter-group">${statusBoxes}</div>
    </fieldset>
    <fieldset><legend>Search</legend>
      <input type="search" name="keywords" placeholder="Search resource content"
        value="${escapeHtml(state.keywords)}">
    </fieldset>
    <label class="sort-by">Sort By
      <select name="sort_key">${sortOptions}</select>
    </label>
  </form>`;
};
