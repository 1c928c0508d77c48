/** Payload types for the relay HTTP API. Field names mirror the wire format. */

export type ChemicalKind =
  | "acephate"
  | "lead"
  | "nitrate"
  | "nitrite"
  | "ph"
  | "hardness";

/** Fixed presentation order for the six tiles. */
export const TILE_ORDER: readonly ChemicalKind[] = [
  "acephate",
  "lead",
  "nitrate",
  "nitrite",
  "ph",
  "hardness",
] as const;

export type Signal = "green" | "yellow" | "red" | "gray";

export interface Device {
  deviceId: string;
  label: string;
  layoutId: string;
  scalesId: string;
  registeredAt: string;
  lastSeenAt: string | null;
}

export interface Measurement {
  chemical: ChemicalKind;
  value: number;
  t_star: number;
  curve_distance: number;
  extrapolated: boolean;
  confidence: number;
}

export interface ChipReadingPayload {
  status: "reacted" | "unreacted" | "partial" | "unreadable";
  measurements: Partial<Record<ChemicalKind, Measurement>>;
  validity: {
    status: string;
    per_chemical: Record<string, boolean>;
    notes: string[];
  };
  rectification_residual_px: number;
}

export interface Interpretation {
  chemical: ChemicalKind;
  signal: Signal;
  headline: string;
  suggestion: string;
  rationale: string;
}

export interface ReportCard {
  overall: Signal;
  headline: string | null;
  interpretations: Interpretation[];
}

export interface ReadingRecord {
  readingId: number;
  deviceId: string;
  capturedAt: string;
  ingestedAt: string;
  processedAt: string | null;
  status: "pending" | "done" | "failed";
  errorCode: string | null;
  imageRef: { sha256: string; path: string; byteCount: number };
  reading: ChipReadingPayload | null;
  report: ReportCard | null;
}

export interface RuleBand {
  min: number | null;
  minInclusive: boolean;
  max: number | null;
  maxInclusive: boolean;
  signal: Signal;
  headline: string;
  suggestion: string;
}

export interface ChemicalPage {
  kind: ChemicalKind;
  displayName: string;
  unit: string;
  summary: string;
  healthyRange: string;
  scale: { values: number[]; labels: (string | null)[] };
  rules: RuleBand[];
  modifier: {
    maxTemperatureC: number;
    signalCap: Signal;
    headline: string;
    suggestion: string;
  } | null;
}
