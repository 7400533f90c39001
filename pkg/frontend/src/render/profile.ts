/** Profile page: four-axis engagement radar and the badge grid. */

import { escapeHtml } from "../format";
import type { BadgeView, EngagementAxes, Profile } from "../types";

export const RADAR_AXES: (keyof EngagementAxes)[] = [
  "authored",
  "answered",
  "rated",
  "achievements",
];

const SIZE = 320;
const CENTER = SIZE / 2;
const RADIUS = 120;

const point = (axisIndex: number, fraction: number): string => {
  const angle = (Math.PI / 2) * axisIndex - Math.PI / 2; // start at 12 o'clock
  const x = CENTER + RADIUS * fraction * Math.cos(angle);
  const y = CENTER + RADIUS * fraction * Math.sin(angle);
  return `${x.toFixed(1)},${y.toFixed(1)}`;
};

/**
 * Axes are normalized per axis by the cohort maximum (stated in the
 * caption); a student with no activity collapses to the origin while the
 * cohort overlay stays visible.
 */
export const renderRadar = (
  student: EngagementAxes,
  cohortMean: EngagementAxes,
  cohortMax: EngagementAxes,
): string => {
  const scale = (axis: keyof EngagementAxes, value: number): number => {
    const max = cohortMax[axis];
    return max > 0 ? Math.min(1, value / max) : 0;
  };
  const studentPoints = RADAR_AXES.map((a, i) => point(i, scale(a, student[a]))).join(" ");
  const cohortPoints = RADAR_AXES.map((a, i) => point(i, scale(a, cohortMean[a]))).join(" ");
  const grid = [0.25, 0.5, 0.75, 1.0]
    .map(
      (f) =>
        `<polygon class="radar-grid" points="${RADAR_AXES.map((_, i) => point(i, f)).join(" ")}"
          fill="none" stroke="#ddd"></polygon>`,
    )
    .join("");
  const axisLines = RADAR_AXES.map(
    (_, i) =>
      `<line x1="${CENTER}" y1="${CENTER}"
        x2="${point(i, 1).split(",")[0]}" y2="${point(i, 1).split(",")[1]}"
        stroke="#ddd"></line>`,
  ).join("");
  const labels = RADAR_AXES.map((axis, i) => {
    const [x, y] = point(i, 1.18).split(",");
    return `<text class="radar-label" x="${x}" y="${y}" text-anchor="middle">
      ${axis} (${student[axis]})</text>`;
  }).join("");
  return `
  <svg class="radar" viewBox="0 0 ${SIZE} ${SIZE}" role="img"
       aria-label="Engagement compared with the cohort">
    ${grid}
    ${axisLines}
    <polygon class="radar-cohort" points="${cohortPoints}"
      fill="rgba(120,120,120,0.15)" stroke="#888" stroke-width="1.5"></polygon>
    <polygon class="radar-student" points="${studentPoints}"
      fill="rgba(61,126,219,0.25)" stroke="#3d7edb" stroke-width="2"></polygon>
    ${labels}
  </svg>
  <p class="radar-caption">Axes scaled to the cohort maximum per axis.</p>`;
};

const TIER_ORDER = { gold: 0, silver: 1, bronze: 2 } as const;

/** Badges grouped by category, highest tier first inside each group. */
export const renderBadges = (badges: BadgeView[]): string => {
  const groups: Record<string, BadgeView[]> = { engagement: [], competency: [] };
  for (const b of badges) groups[b.category]?.push(b);
  const section = (title: string, items: BadgeView[]): string => {
    const sorted = [...items].sort(
      (a, b) => TIER_ORDER[a.tier] - TIER_ORDER[b.tier] || a.id.localeCompare(b.id),
    );
    const cells = sorted
      .map(
        (b) => `
      <div class="badge tier-${b.tier}" title="${escapeHtml(b.criterion)}">
        <span class="badge-tier">${b.tier}</span>
        <span class="badge-name">${escapeHtml(b.id)}</span>
      </div>`,
      )
      .join("");
    return `
    <section class="badge-group">
      <h3>${title}</h3>
      <div class="badge-grid">${cells.length ? cells : '<span class="empty-state">None yet.</span>'}</div>
    </section>`;
  };
  return section("Engagement Badges", groups.engagement) + section("Competency Badges", groups.competency);
};

export const renderProfile = (profile: Profile): string => `
  <div class="profile-page">
    ${renderRadar(
      profile.engagement.student,
      profile.engagement.cohort_mean,
      profile.engagement.cohort_max,
    )}
    ${renderBadges(profile.badges)}
  </div>`;
