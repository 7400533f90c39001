/** Authoring forms with live preview, and the moderation queue. */

import { escapeHtml, renderRichText } from "../format";
import type { ResourceDetail, Topic } from "../types";

export interface McqDraft {
  body: string;
  tags: string[];
  choices: string[];
  correct_index: number;
  explanation: string;
}

/**
 * MCQ authoring walks the five steps in order: question body, topic tags,
 * answer choices, the correct answer, and the explanation.
 */
export const renderMcqForm = (topics: Topic[], draft: McqDraft): string => {
  const topicBoxes = topics
    .map(
      (t) => `
      <label><input type="checkbox" name="tags" value="${escapeHtml(t.id)}"
        ${draft.tags.includes(t.id) ? "checked" : ""}> ${escapeHtml(t.name)}</label>`,
    )
    .join("");
  const choiceRows = draft.choices
    .map(
      (choice, i) => `
      <div class="choice-row">
        <input type="radio" name="correct_index" value="${i}"
          ${draft.correct_index === i ? "checked" : ""} aria-label="mark choice ${i + 1} correct">
        <input type="text" name="choice" value="${escapeHtml(choice)}"
          placeholder="Choice ${i + 1}">
      </div>`,
    )
    .join("");
  return `
  <form id="author-form" class="author-form" data-kind="mcq">
    <ol class="author-steps">
      <li><label>Question body
        <textarea name="body" placeholder="Write the question; $math$ is rendered">${escapeHtml(draft.body)}</textarea>
      </label></li>
      <li><fieldset><legend>Topics</legend>${topicBoxes}</fieldset></li>
      <li><fieldset><legend>Choices</legend>${choiceRows}
        <button type="button" data-action="add-choice">Add choice</button>
      </fieldset></li>
      <li class="correct-step">Select the correct answer with the radio buttons above.</li>
      <li><label>Explanation of the solution
        <textarea name="explanation">${escapeHtml(draft.explanation)}</textarea>
      </label></li>
    </ol>
    <div class="author-actions">
      <button type="button" data-action="preview">Preview</button>
      <button type="button" data-action="save-draft">Save draft</button>
      <button type="submit" class="primary">Submit</button>
    </div>
  </form>
  <div id="author-preview" class="author-preview" hidden></div>`;
};

/** Preview pane: exactly what an attempting peer would see, math rendered. */
export const renderPreview = (draft: McqDraft): string => `
  <h3>Preview</h3>
  <div class="resource-body">${renderRichText(draft.body)}</div>
  <ul class="preview-choices">
    ${draft.choices
      .filter((c) => c.trim() !== "")
      .map((c) => `<li>${renderRichText(c)}</li>`)
      .join("")}
  </ul>`;

/** Instructor queue of resources awaiting a decision. */
export const renderModerationQueue = (pending: ResourceDetail[]): string => {
  if (pending.length === 0) {
    return `<div class="empty-state">Nothing awaiting moderation.</div>`;
  }
  const rows = pending
    .map(
      (r) => `
    <article class="queue-item" data-resource="${escapeHtml(r.id)}">
      <div class="resource-body">${renderRichText(r.body)}</div>
      <span class="kind-label">${escapeHtml(r.kind)}</span>
      <span class="author-label">by ${escapeHtml(r.author_id)}</span>
      <div class="queue-actions">
        <button data-action="approve" data-resource="${escapeHtml(r.id)}" class="primary">Approve</button>
        <button data-action="reject" data-resource="${escapeHtml(r.id)}">Reject with note</button>
      </div>
    </article>`,
    )
    .join("");
  return `<div class="moderation-queue">${rows}</div>`;
};

/** A rejection note shown to the author on their returned draft. */
export const renderModerationNote = (note: string): string =>
  note ? `<div class="moderation-note">Moderator note: ${escapeHtml(note)}</div>` : "";
