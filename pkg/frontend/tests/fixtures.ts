/** Fixture API payloads, shaped exactly like the relay's wire format.
 * pages.json was captured from a running relay; the reading records are
 * hand-built around the same shapes.
 */

import type {
  ChemicalKind,
  ChemicalPage,
  Interpretation,
  Measurement,
  ReadingRecord,
  Signal,
} from "../src/types";
import { TILE_ORDER } from "../src/types";
import type { PageMap } from "../src/viewmodel";
import rawPages from "./fixtures/pages.json";

export const PAGES: PageMap = rawPages as unknown as Record<
  ChemicalKind,
  ChemicalPage
>;

function measurement(chemical: ChemicalKind, value: number): Measurement {
  return {
    chemical,
    value,
    t_star: 0.5,
    curve_distance: 0.0002,
    extrapolated: false,
    confidence: 0.99,
  };
}

const GREEN_ROWS: [ChemicalKind, number, string][] = [
  ["acephate", 0.0, "ACEPHATE_NEGATIVE"],
  ["lead", 10.0, "LEAD_NOT_DETECTED"],
  ["nitrate", 3.0, "NITRATE_OK"],
  ["nitrite", 0.2, "NITRITE_OK"],
  ["ph", 6.5, "PH_OPTIMAL"],
  ["hardness", 80.0, "HARDNESS_OK"],
];

function record(
  readingId: number,
  capturedAt: string,
  readingStatus: "reacted" | "unreacted" | "unreadable",
  measurements: Partial<Record<ChemicalKind, Measurement>>,
  interpretations: Interpretation[],
  overall: Signal,
  headline: string | null,
): ReadingRecord {
  const perChemical: Record<string, boolean> = {};
  for (const kind of TILE_ORDER) perChemical[kind] = kind in measurements;
  return {
    readingId,
    deviceId: "dev-fixture",
    capturedAt,
    ingestedAt: capturedAt,
    processedAt: capturedAt,
    status: "done",
    errorCode: null,
    imageRef: { sha256: "0".repeat(64), path: "images/" + "0".repeat(64), byteCount: 28147 },
    reading: {
      status: readingStatus,
      measurements,
      validity: { status: readingStatus, per_chemical: perChemical, notes: [] },
      rectification_residual_px: 0.11,
    },
    report: { overall, headline, interpretations },
  };
}

export function allGreenRecord(capturedAt = "2026-08-14T06:00:00.000000Z"): ReadingRecord {
  const measurements: Partial<Record<ChemicalKind, Measurement>> = {};
  const interpretations: Interpretation[] = [];
  for (const [chemical, value, headline] of GREEN_ROWS) {
    measurements[chemical] = measurement(chemical, value);
    interpretations.push({
      chemical,
      signal: "green",
      headline,
      suggestion: "NONE",
      rationale: "fixture",
    });
  }
  return record(1, capturedAt, "reacted", measurements, interpretations, "green", null);
}

/** Same plant, but nitrate measured past the 10 ppm limit. */
export function nitrateRedRecord(capturedAt = "2026-08-14T06:15:00.000000Z"): ReadingRecord {
  const base = allGreenRecord(capturedAt);
  const measurements = { ...base.reading!.measurements };
  measurements.nitrate = { ...measurement("nitrate", 12.0), extrapolated: true };
  const interpretations = base.report!.interpretations.map((item) =>
    item.chemical === "nitrate"
      ? {
          ...item,
          signal: "red" as Signal,
          headline: "NITRATE_EXCESS",
          suggestion: "SUGGEST_TEST_BEFORE_HARVEST",
        }
      : item,
  );
  const result = record(2, capturedAt, "reacted", measurements, interpretations, "red", null);
  return result;
}

/** Dry chip: no droplets overnight, everything Gray. */
export function grayRecord(capturedAt = "2026-08-14T06:30:00.000000Z"): ReadingRecord {
  const interpretations: Interpretation[] = TILE_ORDER.map((chemical) => ({
    chemical,
    signal: "gray" as Signal,
    headline: "NO_GUTTATION_COLLECTED",
    suggestion: "NONE",
    rationale: "circle stayed dry; nothing to measure",
  }));
  return record(3, capturedAt, "unreacted", {}, interpretations, "gray", "NO_GUTTATION_COLLECTED");
}

/** A short week of history: greens with a dry night in the middle. */
export function historyRecords(): ReadingRecord[] {
  const days = [
    "2026-08-08T06:00:00.000000Z",
    "2026-08-09T06:00:00.000000Z",
    "2026-08-10T06:00:00.000000Z",
    "2026-08-11T06:00:00.000000Z",
    "2026-08-12T06:00:00.000000Z",
    "2026-08-13T06:00:00.000000Z",
    "2026-08-14T06:00:00.000000Z",
  ];
  return days.map((stamp, index) => {
    if (index === 3) return { ...grayRecord(stamp), readingId: index + 1 };
    const base = allGreenRecord(stamp);
    base.reading!.measurements.nitrate!.value = 2.0 + index * 0.5;
    return { ...base, readingId: index + 1 };
  });
}
