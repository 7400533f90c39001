import { describe, expect, it } from "vitest";

import {
  renderMcqForm,
  renderModerationNote,
  renderModerationQueue,
  renderPreview,
} from "../src/render/authoring";
import type { ResourceDetail, Topic } from "../src/types";

const TOPICS: Topic[] = [
  { id: "t1", name: "SQL", ordinal: 0 },
  { id: "t2", name: "Security", ordinal: 1 },
];

const DRAFT = {
  body: "Evaluate $x^{2}$ for $x = 3$",
  tags: ["t1"],
  choices: ["6", "9", "12", ""],
  correct_index: 1,
  explanation: "Square the value.",
};

describe("mcq authoring form", () => {
  const html = renderMcqForm(TOPICS, DRAFT);

  it("walks the five steps in order", () => {
    const body = html.indexOf("Question body");
    const topics = html.indexOf("<legend>Topics</legend>");
    const choices = html.indexOf("<legend>Choices</legend>");
    const correct = html.indexOf("correct answer");
    const explanation = html.indexOf("Explanation of the solution");
    expect([body, topics, choices, correct, explanation].every((i) => i >= 0)).toBe(true);
    expect(body).toBeLessThan(topics);
    expect(topics).toBeLessThan(choices);
    expect(choices).toBeLessThan(correct);
    expect(correct).toBeLessThan(explanation);
  });

  it("offers preview, draft, and submit", () => {
    expect(html).toContain(`data-action="preview"`);
    expect(html).toContain(`data-action="save-draft"`);
    expect(html).toContain(`type="submit"`);
  });

  it("matches the snapshot", () => {
    expect(html).toMatchSnapshot();
  });
});

describe("preview", () => {
  it("renders math notation before submission", () => {
    const html = renderPreview(DRAFT);
    expect(html).toContain(`<span class="math">x<sup>2</sup></span>`);
    expect(html).toContain(`<span class="math">x = 3</span>`);
  });

  it("drops empty choices from the preview", () => {
    const html = renderPreview(DRAFT);
    expect([...html.matchAll(/<li>/g)]).toHaveLength(3);
  });
});

describe("moderation queue", () => {
  const pending: ResourceDetail[] = [
    {
      id: "res3",
      offering_id: "off1",
      author_id: "usr5",
      kind: "mcq",
      body: "Pending question",
      tags: ["t1"],
      status: "pending_moderation",
      created_at: "2026-03-04T10:00:00+00:00",
      edited_at: "2026-03-04T10:00:00+00:00",
      endorsed: false,
      quality: { mean_stars: null, count: 0 },
      comments: [],
      choices: ["a", "b"],
    },
  ];

  it("lists pending items with approve and reject actions", () => {
    const html = renderModerationQueue(pending);
    expect(html).toContain("Pending question");
    expect(html).toContain(`data-action="approve" data-resource="res3"`);
    expect(html).toContain(`data-action="reject" data-resource="res3"`);
  });

  it("shows an empty queue message", () => {
    expect(renderModerationQueue([])).toContain("Nothing awaiting moderation");
  });

  it("renders the rejection note for the author", () => {
    expect(renderModerationNote("fix choice 2")).toContain("Moderator note: fix choice 2");
    expect(renderModerationNote("")).toBe("");
  });
});
