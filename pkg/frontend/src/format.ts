/** Small presentation helpers shared by the render modules. */

export const escapeHtml = (s: string): string =>
  s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");

/**
 * Render body markup: text with $...$ math segments. Inside math, ^{...}
 * and _{...} (or single-character ^x / _x) become sup/sub; everything is
 * escaped first, so no markup can be injected.
 */
export const renderRichText = (body: string): string => {
  const parts = body.split(/\$(.+?)\$/g);
  return parts
    .map((part, i) => {
      if (i % 2 === 0) return escapeHtml(part);
      let math = escapeHtml(part);
      math = math.replace(/\^\{([^}]*)\}/g, "<sup>$1</sup>");
      math = math.replace(/_\{([^}]*)\}/g, "<sub>$1</sub>");
      math = math.replace(/\^(\S)/g, "<sup>$1</sup>");
      math = math.replace(/_(\S)/g, "<sub>$1</sub>");
      return `<span class="math">${math}</span>`;
    })
    .join("");
};

export const formatRating = (value: number): string => value.toFixed(0);

export const formatStars = (mean: number | null): string =>
  mean === null ? "unrated" : `${mean.toFixed(1)}★`;

export const formatFit = (fit: number): string => `${Math.round(fit * 100)}%`;
