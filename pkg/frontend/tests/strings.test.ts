import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { HEADLINES, SUGGESTIONS, headlineText, suggestionText } from "../src/strings";

const tablePath = join(
  dirname(fileURLToPath(import.meta.url)),
  "..",
  "..",
  "src",
  "sapsense",
  "data",
  "rules_tomato_v1.json",
);

interface RuleDoc {
  version: string;
  rules: Record<string, { headline: string; suggestion: string }[]>;
  modifiers?: { headline: string; suggestion: string }[];
}

const table: RuleDoc = JSON.parse(readFileSync(tablePath, "utf-8"));

describe("display string exhaustiveness", () => {
  it("covers every headline the rule table and gray reports can emit", () => {
    const expected = new Set(["NO_GUTTATION_COLLECTED", "CHEMICAL_UNUSABLE"]);
    for (const rules of Object.values(table.rules)) {
      for (const rule of rules) expected.add(rule.headline);
    }
    for (const modifier of table.modifiers ?? []) expected.add(modifier.headline);
    const missing = [...expected].filter((code) => !(code in HEADLINES));
    expect(missing).toEqual([]);
  });

  it("covers every suggestion code", () => {
    const expected = new Set<string>();
    for (const rules of Object.values(table.rules)) {
      for (const rule of rules) expected.add(rule.suggestion);
    }
    for (const modifier of table.modifiers ?? []) expected.add(modifier.suggestion);
    const missing = [...expected].filter((code) => !(code in SUGGESTIONS));
    expect(missing).toEqual([]);
  });

  it("maps NONE to an empty suggestion", () => {
    expect(suggestionText("NONE")).toBe("");
  });

  it("humanizes codes it has never seen instead of leaking caps", () => {
    expect(headlineText("SOME_FUTURE_CODE")).toBe("Some future code");
    expect(suggestionText("SUGGEST_DO_THE_THING")).toBe("Do the thing");
  });
});
