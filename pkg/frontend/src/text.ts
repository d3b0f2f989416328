export function escapeXml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Visible text of a markup string: everything outside tags, unescaped. */
export function visibleText(markup: string): string[] {
  const texts: string[] = [];
  for (const match of markup.matchAll(/>([^<>]+)</g)) {
    const raw = (match[1] ?? "").trim();
    if (raw.length === 0) continue;
    texts.push(
      raw
        .replace(/&lt;/g, "<")
        .replace(/&gt;/g, ">")
        .replace(/&quot;/g, '"')
        .replace(/&amp;/g, "&"),
    );
  }
  return texts;
}
