/** Pure view-model builders: server payloads in, display structures out.
 * No quantification or interpretation happens here; values, signals and
 * codes arrive finished from the relay and are only formatted.
 */

import { headlineText, suggestionText } from "./strings.js";
import type {
  ChemicalKind,
  ChemicalPage,
  ReadingRecord,
  Signal,
} from "./types.js";
import { TILE_ORDER } from "./types.js";

export const STALE_AFTER_MS = 24 * 3600 * 1000;
export const NO_DATA = "no data";

export interface Tile {
  chemical: ChemicalKind;
  name: string;
  signal: Signal;
  /** "no data" for Gray tiles; otherwise "7.5 ppm" style. */
  valueText: string;
  headline: string;
}

export interface SuggestionCard {
  chemical: ChemicalKind;
  name: string;
  signal: Signal;
  text: string;
}

export interface ReadingViewModel {
  deviceLabel: string;
  capturedAtText: string;
  stale: boolean;
  tiles: Tile[];
  suggestions: SuggestionCard[];
  banner: { signal: Signal; text: string };
}

export type PageMap = Partial<Record<ChemicalKind, ChemicalPage>>;

export function formatValue(value: number, unit: string): string {
  if (unit === "level") return String(Math.round(value));
  const rounded =
    Math.abs(value) >= 100 ? value.toFixed(0)
    : Math.abs(value) >= 10 ? value.toFixed(1)
    : value.toFixed(2);
  const trimmed = rounded.replace(/\.0+$/, "").replace(/(\.\d*[1-9])0+$/, "$1");
  return unit === "pH" ? trimmed : `${trimmed} ${unit}`;
}

export function formatCapturedAt(iso: string): string {
  const when = new Date(iso);
  return when.toLocaleString(undefined, {
    year: "numeric",
    month: "short",
    day: "numeric",
    hour: "2-digit",
    minute: "2-digit",
  });
}

function bannerText(record: ReadingRecord, overall: Signal): string {
  const headline = record.report?.headline;
  if (headline) return headlineText(headline);
  switch (overall) {
    case "green":
      return "All clear: every reading in its healthy range";
    case "yellow":
      return "Worth watching: some readings drifting";
    case "red":
      return "Action needed: at least one reading out of range";
    default:
      return headlineText("CHEMICAL_UNUSABLE");
  }
}

export function buildReadingViewModel(
  deviceLabel: string,
  record: ReadingRecord,
  pages: PageMap,
  now: () => Date = () => new Date(),
): ReadingViewModel {
  const report = record.report;
  const measurements = record.reading?.measurements ?? {};

  const tiles: Tile[] = TILE_ORDER.map((chemical) => {
    const page = pages[chemical];
    const name = page?.displayName ?? chemical;
    const item = report?.interpretations.find((i) => i.chemical === chemical);
    const signal: Signal = item?.signal ?? "gray";
    const measurement = measurements[chemical];
    const valueText =
      signal === "gray" || !measurement
        ? NO_DATA
        : formatValue(measurement.value, page?.unit ?? "");
    return {
      chemical,
      name,
      signal,
      valueText,
      headline: item ? headlineText(item.headline) : NO_DATA,
    };
  });

  const suggestions: SuggestionCard[] = (report?.interpretations ?? [])
    .filter((i) => i.signal !== "gray" && i.suggestion !== "NONE")
    .map((i) => ({
      chemical: i.chemical,
      name: pages[i.chemical]?.displayName ?? i.chemical,
      signal: i.signal,
      text: suggestionText(i.suggestion),
    }));

  const overall: Signal = report?.overall ?? "gray";
  const capturedMs = new Date(record.capturedAt).getTime();
  return {
    deviceLabel,
    capturedAtText: formatCapturedAt(record.capturedAt),
    stale: now().getTime() - capturedMs > STALE_AFTER_MS,
    tiles,
    suggestions,
    banner: { signal: overall, text: bannerText(record, overall) },
  };
}

export interface InfoViewModel {
  name: string;
  unit: string;
  summary: string;
  healthyRange: string;
  /** Device's newest value shown in context; null when the tile is gray. */
  currentValueText: string | null;
  currentSignal: Signal | null;
}

export function buildInfoViewModel(
  page: ChemicalPage,
  latest: ReadingRecord | null,
): InfoViewModel {
  const item = latest?.report?.interpretations.find(
    (i) => i.chemical === page.kind,
  );
  const measurement = latest?.reading?.measurements?.[page.kind];
  const usable = item && item.signal !== "gray" && measurement;
  return {
    name: page.displayName,
    unit: page.unit,
    summary: page.summary,
    healthyRange: page.healthyRange,
    currentValueText: usable ? formatValue(measurement.value, page.unit) : null,
    currentSignal: usable ? item.signal : null,
  };
}
