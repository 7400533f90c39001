/** Open learner model: per-topic bars with band colors plus a cohort line. */

import { escapeHtml, formatRating } from "../format";
import type { Band, KnowledgeStateCurrent, KnowledgeStateOverTime } from "../types";

// bijective band -> color mapping
export const BAND_COLORS: Record<Band, string> = {
  red: "#d64541",
  yellow: "#f0b840",
  blue: "#3d7edb",
};

const WIDTH = 720;
const HEIGHT = 280;
const PAD = { left: 48, right: 16, top: 16, bottom: 48 };

const yScale = (rating: number, min: number, max: number): number => {
  const inner = HEIGHT - PAD.top - PAD.bottom;
  return PAD.top + inner - ((rating - min) / (max - min)) * inner;
};

export const renderModeToggle = (mode: "current" | "overtime"): string => `
  <label class="viz-toggle">Visualisation Data
    <select id="viz-mode">
      <option value="current"${mode === "current" ? " selected" : ""}>Current knowledge state</option>
      <option value="overtime"${mode === "overtime" ? " selected" : ""}>Knowledge state over time</option>
    </select>
  </label>`;

/** Bar chart of the current state; bars in offering order, cohort overlay line. */
export const renderCurrentState = (state: KnowledgeStateCurrent): string => {
  if (state.topics.length === 0) {
    return `<div class="empty-state">No topics defined for this offering yet.</div>`;
  }
  const ratings = state.topics.flatMap((t) => [t.rating, t.cohort_mean]);
  const min = Math.min(600, ...ratings.map((r) => r - 50));
  const max = Math.max(1400, ...ratings.map((r) => r + 50));
  const band = (WIDTH - PAD.left - PAD.right) / state.topics.length;
  const barWidth = Math.min(64, band * 0.6);

  const bars = state.topics
    .map((t, i) => {
      const x = PAD.left + i * band + (band - barWidth) / 2;
      const y = yScale(t.rating, min, max);
      const bottom = yScale(min, min, max);
      return `<rect class="bar band-${t.band}" data-topic="${escapeHtml(t.topic_id)}"
        x="${x.toFixed(1)}" y="${y.toFixed(1)}" width="${barWidth.toFixed(1)}"
        height="${(bottom - y).toFixed(1)}" fill="${BAND_COLORS[t.band]}">
        <title>${escapeHtml(t.topic)}: ${formatRating(t.rating)} (${t.band})</title>
      </rect>`;
    })
    .join("");

  const linePoints = state.topics
    .map((t, i) => {
      const x = PAD.left + i * band + band / 2;
      return `${x.toFixed(1)},${yScale(t.cohort_mean, min, max).toFixed(1)}`;
    })
    .join(" ");

  const labels = state.topics
    .map((t, i) => {
      const x = PAD.left + i * band + band / 2;
      return `<text class="axis-label" x="${x.toFixed(1)}" y="${HEIGHT - 28}"
        text-anchor="middle">${escapeHtml(t.topic)}</text>`;
    })
    .join("");

  return `
  <svg class="olm-chart" viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img"
       aria-label="Per-topic competency with cohort average">
    ${bars}
    <polyline class="cohort-line" points="${linePoints}" fill="none"
      stroke="#444" stroke-width="2" stroke-dasharray="6 3"></polyline>
    ${labels}
  </svg>
  <div class="legend">
    <span class="legend-item"><span class="swatch" style="background:${BAND_COLORS.red}"></span>needs work</span>
    <span class="legend-item"><span class="swatch" style="background:${BAND_COLORS.yellow}"></span>adequate</span>
    <span class="legend-item"><span class="swatch" style="background:${BAND_COLORS.blue}"></span>mastery</span>
    <span class="legend-item"><span class="swatch line-swatch"></span>cohort average</span>
  </div>`;
};

const SERIES_COLORS = ["#3d7edb", "#d64541", "#2c9c5e", "#f0b840", "#8e55c9", "#17a2b8"];

/** One line per topic across the snapshot dates. */
export const renderOverTime = (state: KnowledgeStateOverTime): string => {
  if (state.topics.length === 0) {
    return `<div class="empty-state">No topics defined for this offering yet.</div>`;
  }
  const values = state.series.flatMap((p) => Object.values(p.ratings));
  const min = Math.min(900, ...values.map((v) => v - 50));
  const max = Math.max(1100, ...values.map((v) => v + 50));
  const inner = WIDTH - PAD.left - PAD.right;
  const step = state.series.length > 1 ? inner / (state.series.length - 1) : 0;

  const lines = state.topics
    .map((topic, ti) => {
      const color = SERIES_COLORS[ti % SERIES_COLORS.length];
      const points = state.series
        .map((p, i) => {
          const x = PAD.left + i * step;
          const y = yScale(p.ratings[topic.topic_id] ?? min, min, max);
          return `${x.toFixed(1)},${y.toFixed(1)}`;
        })
        .join(" ");
      return `<polyline class="topic-line" data-topic="${escapeHtml(topic.topic_id)}"
        points="${points}" fill="none" stroke="${color}" stroke-width="2"></polyline>`;
    })
    .join("");

  const dates = state.series
    .map((p, i) => {
      const x = PAD.left + i * step;
      return `<text class="axis-label" x="${x.toFixed(1)}" y="${HEIGHT - 28}"
        text-anchor="middle">${escapeHtml(p.date)}</text>`;
    })
    .join("");

  const legend = state.topics
    .map(
      (topic, ti) =>
        `<span class="legend-item"><span class="swatch"
          style="background:${SERIES_COLORS[ti % SERIES_COLORS.length]}"></span>${escapeHtml(topic.topic)}</span>`,
    )
    .join("");

  return `
  <svg class="olm-chart" viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img"
       aria-label="Knowledge state over time">
    ${lines}
    ${dates}
  </svg>
  <div class="legend">${legend}</div>`;
};

/** Retryable failure banner; nothing stale is drawn behind it. */
export const renderErrorBanner = (message: string): string => `
  <div class="error-banner" role="alert">
    <span>${escapeHtml(message)}</span>
    <button class="retry-button" data-action="retry">Retry</button>
  </div>`;
