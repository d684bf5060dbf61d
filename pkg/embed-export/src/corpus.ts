/**
 * Minimal reader for the corpus file format: one JSON object per line
 * with keys id / label / source and optional text. The exporter only
 * needs ids and texts; records without text are collected and reported
 * together, since a partial export would fail downstream validation
 * anyway.
 */

import { readFileSync } from "node:fs";

export interface CorpusText {
  id: string;
  text: string;
}

export function readCorpusTexts(path: string): CorpusText[] {
  const raw = readFileSync(path, "utf-8");
  const out: CorpusText[] = [];
  const seen = new Set<string>();
  const missingText: string[] = [];
  const lines = raw.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let obj: unknown;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new Error(`line ${i + 1}: invalid JSON (${(err as Error).message})`);
    }
    if (typeof obj !== "object" || obj === null) {
      throw new Error(`line ${i + 1}: expected an object`);
    }
    const rec = obj as Record<string, unknown>;
    if (typeof rec.id !== "string") {
      throw new Error(`line ${i + 1}: id must be a string`);
    }
    if (seen.has(rec.id)) {
      throw new Error(`line ${i + 1}: duplicate id ${JSON.stringify(rec.id)}`);
    }
    seen.add(rec.id);
    if (typeof rec.text !== "string") {
      missingText.push(rec.id);
      continue;
    }
    out.push({ id: rec.id, text: rec.text });
  }
  if (missingText.length > 0) {
    throw new Error(
      `corpus records without text cannot be embedded: ${missingText.join(", ")}`,
    );
  }
  if (out.length === 0) {
    throw new Error("corpus has no records");
  }
  return out;
}
