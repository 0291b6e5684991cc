/** Client-side rule pattern validation, mirroring the server's contract:
 * exactly one `<outcome>` / `<population>` marker (optionally `<name:text>`).
 * Returns an error message, or null when the pattern is acceptable. */

const MARKER = /<(outcome|population)(?::([^<>]+))?>/g;

export function validateRulePattern(pattern: string): string | null {
  if (!pattern.trim()) {
    return "pattern is empty";
  }
  const markers = [...pattern.matchAll(MARKER)];
  if (markers.length === 0) {
    return "pattern needs an <outcome> or <population> marker";
  }
  if (markers.length > 1) {
    return "pattern must contain exactly one marker";
  }
  return null;
}
