import { readFileSync } from "node:fs";

export function loadFixture<T = unknown>(name: string): T {
  const url = new URL(`./fixtures/${name}.json`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as T;
}

/** Every string and stringified number reachable in a payload tree.
 * Used to prove that displayed numbers came from the service. */
export function collectFixtureStrings(value: unknown, out: string[] = []): string[] {
  if (typeof value === "number") {
    out.push(String(value));
  } else if (typeof value === "string") {
    out.push(value);
  } else if (Array.isArray(value)) {
    for (const item of value) collectFixtureStrings(item, out);
  } else if (value !== null && typeof value === "object") {
    for (const item of Object.values(value)) collectFixtureStrings(item, out);
  }
  return out;
}

const NUMBER_TOKEN = /\d+(?:\.\d+)?(?:[eE][+-]?\d+)?/g;

export function numericTokens(texts: string[]): string[] {
  const tokens: string[] = [];
  for (const text of texts) {
    for (const match of text.matchAll(NUMBER_TOKEN)) tokens.push(match[0]);
  }
  return tokens;
}

/** Tokens in `texts` that cannot be traced back to a fixture payload.
 * A token is accounted for when some service string contains it or some
 * service number prints as exactly that token. */
export function unexplainedTokens(texts: string[], fixtures: unknown[]): string[] {
  const allowed = fixtures.flatMap((fixture) => collectFixtureStrings(fixture));
  const numbers = new Set(allowed);
  return numericTokens(texts).filter(
    (token) => !numbers.has(token) && !allowed.some((s) => s.includes(token)),
  );
}
