import { describe, expect, it } from "vitest";

import {
  BAND_COLORS,
  renderCurrentState,
  renderErrorBanner,
  renderModeToggle,
  renderOverTime,
} from "../src/render/learner";
import type { KnowledgeStateCurrent, KnowledgeStateOverTime } from "../src/types";

const CURRENT: KnowledgeStateCurrent = {
  mode: "current",
  topics: [
    { topic_id: "t1", topic: "Relational Models", ordinal: 0, rating: 999.9, band: "red", cohort_mean: 1010.0 },
    { topic_id: "t2", topic: "SQL", ordinal: 1, rating: 1000.0, band: "yellow", cohort_mean: 1005.5 },
    { topic_id: "t3", topic: "Security", ordinal: 2, rating: 1200.0, band: "blue", cohort_mean: 998.0 },
  ],
};

describe("current knowledge state chart", () => {
  it("maps bands onto colors: <1000 red, [1000,1200) yellow, >=1200 blue", () => {
    const html = renderCurrentState(CURRENT);
    expect(html).toContain(`class="bar band-red"`);
    expect(html).toContain(`class="bar band-yellow"`);
    expect(html).toContain(`class="bar band-blue"`);
    expect(html).toContain(`fill="${BAND_COLORS.red}"`);
    expect(html).toContain(`fill="${BAND_COLORS.yellow}"`);
    expect(html).toContain(`fill="${BAND_COLORS.blue}"`);
  });

  it("band-to-color mapping is bijective", () => {
    const colors = Object.values(BAND_COLORS);
    expect(new Set(colors).size).toBe(colors.length);
  });

  it("renders the topics in API order with fetched values", () => {
    const html = renderCurrentState(CURRENT);
    const order = [...html.matchAll(/data-topic="(t\d)"/g)].map((m) => m[1]);
    expect(order).toEqual(["t1", "t2", "t3"]);
    expect(html).toContain("Relational Models: 1000 (red)");
    expect(html).toContain("SQL: 1000 (yellow)");
    expect(html).toContain("Security: 1200 (blue)");
  });

  it("draws the cohort average as a line overlay", () => {
    const html = renderCurrentState(CURRENT);
    expect(html).toContain(`class="cohort-line"`);
    expect(html).toContain("cohort average");
  });

  it("shows an empty state instead of a chart when there are no topics", () => {
    const html = renderCurrentState({ mode: "current", topics: [] });
    expect(html).toContain("empty-state");
    expect(html).not.toContain("<svg");
  });

  it("matches the snapshot", () => {
    expect(renderCurrentState(CURRENT)).toMatchSnapshot();
  });
});

describe("over-time chart", () => {
  const OVERTIME: KnowledgeStateOverTime = {
    mode: "overtime",
    topics: [
      { topic_id: "t1", topic: "SQL", ordinal: 0 },
      { topic_id: "t2", topic: "Security", ordinal: 1 },
    ],
    series: [
      { date: "2026-03-02", ratings: { t1: 1000, t2: 1000 } },
      { date: "2026-03-05", ratings: { t1: 1032.5, t2: 988.1 } },
      { date: "2026-03-09", ratings: { t1: 1051.0, t2: 1002.9 } },
    ],
  };

  it("draws one line per topic with the snapshot dates on the axis", () => {
    const html = renderOverTime(OVERTIME);
    expect([...html.matchAll(/class="topic-line"/g)]).toHaveLength(2);
    expect(html).toContain("2026-03-02");
    expect(html).toContain("2026-03-09");
  });

  it("matches the snapshot", () => {
    expect(renderOverTime(OVERTIME)).toMatchSnapshot();
  });
});

describe("mode toggle and failures", () => {
  it("offers current and over-time options", () => {
    const html = renderModeToggle("overtime");
    expect(html).toContain("Visualisation Data");
    expect(html).toContain(`value="current"`);
    expect(html).toContain(`value="overtime" selected`);
  });

  it("failure banner is retryable and carries no stale chart", () => {
    const html = renderErrorBanner("backend unreachable");
    expect(html).toContain("backend unreachable");
    expect(html).toContain(`data-action="retry"`);
    expect(html).not.toContain("<svg");
  });
});
