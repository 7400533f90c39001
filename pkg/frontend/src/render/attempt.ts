/** Attempt page: answer first, then the reveal, then rating and comments. */

import { escapeHtml, renderRichText } from "../format";
import type { AttemptResult, ResourceDetail } from "../types";

/**
 * MCQ before submission: choices only. The correct answer, the peer answer
 * distribution, and the explanation appear only after the server confirms
 * an attempt; rating stays disabled until then.
 */
export const renderAttemptPage = (
  resource: ResourceDetail,
  result: AttemptResult | null,
): string => {
  const body = `<div class="resource-body">${renderRichText(resource.body)}</div>`;
  if (resource.kind === "mcq") {
    return `
    <section class="attempt-page" data-resource="${escapeHtml(resource.id)}">
      ${body}
      ${result === null ? renderChoiceForm(resource) : renderReveal(resource, result)}
      ${renderEvaluation(resource, result !== null)}
    </section>`;
  }
  const extra =
    resource.kind === "worked_example"
      ? `<ol class="steps">${(resource.steps ?? [])
          .map((s) => `<li>${renderRichText(s)}</li>`)
          .join("")}</ol>
         <div class="final-solution">${renderRichText(resource.final_solution ?? "")}</div>`
      : "";
  return `
  <section class="attempt-page" data-resource="${escapeHtml(resource.id)}">
    ${body}
    ${extra}
    ${renderEvaluation(resource, result !== null)}
  </section>`;
};

const renderChoiceForm = (resource: ResourceDetail): string => {
  const choices = (resource.choices ?? [])
    .map(
      (choice, i) => `
      <label class="choice">
        <input type="radio" name="choice" value="${i}">
        ${renderRichText(choice)}
      </label>`,
    )
    .join("");
  return `
  <form id="attempt-form" class="choice-form">
    ${choices}
    <button type="submit" class="primary">Submit answer</button>
  </form>`;
};

/** Post-submission reveal: correctness, right answer, distribution, explanation. */
const renderReveal = (resource: ResourceDetail, result: AttemptResult): string => {
  const verdict =
    result.correct === true
      ? `<span class="verdict correct">Correct</span>`
      : `<span class="verdict incorrect">Incorrect</span>`;
  const distribution = result.answer_distribution ?? [];
  const total = distribution.reduce((a, b) => a + b, 0) || 1;
  const bars = distribution
    .map((count, i) => {
      const isRight = i === result.correct_index;
      const pct = (100 * count) / total;
      return `
      <div class="dist-row${isRight ? " right-answer" : ""}">
        <span class="dist-label">${renderRichText(resource.choices?.[i] ?? String(i))}</span>
        <span class="dist-bar" style="width:${pct.toFixed(1)}%"></span>
        <span class="dist-count">${count}</span>
      </div>`;
    })
    .join("");
  return `
  <div class="reveal">
    ${verdict}
    <h3>How your peers answered</h3>
    <div class="answer-distribution">${bars}</div>
    <h3>Explanation</h3>
    <div class="explanation">${renderRichText(result.explanation ?? "")}</div>
  </div>`;
};

/** Star rating plus comment box; disabled until the resource was attempted. */
const renderEvaluation = (resource: ResourceDetail, enabled: boolean): string => {
  const stars = [1, 2, 3, 4, 5]
    .map(
      (n) => `
      <button class="star" data-stars="${n}" ${enabled ? "" : "disabled"}
        aria-label="rate ${n} stars">★</button>`,
    )
    .join("");
  const comments = resource.comments
    .map(
      (c) => `
      <li class="comment"><span class="comment-author">${escapeHtml(c.author_id)}</span>
        ${escapeHtml(c.text)}</li>`,
    )
    .join("");
  return `
  <div class="evaluation${enabled ? "" : " locked"}">
    <div class="star-rating" data-enabled="${enabled}">${stars}
      <span class="quality-summary">${
        resource.quality.mean_stars === null
          ? "unrated"
          : `${resource.quality.mean_stars.toFixed(1)}★ (${resource.quality.count})`
      }</span>
    </div>
    <form id="comment-form">
      <textarea name="text" placeholder="Add a comment" ${enabled ? "" : "disabled"}></textarea>
      <button type="submit" ${enabled ? "" : "disabled"}>Comment</button>
    </form>
    <ul class="comments">${comments}</ul>
    <button class="flag-button" data-action="flag">⚑ Flag inappropriate content</button>
  </div>`;
};
