/** Display strings for every headline/suggestion code the relay can emit.
 *
 * The build runs scripts/check-strings.mjs, which walks the versioned rule
 * table and fails if any code shipped by the server is missing here, so a
 * rule-table change cannot silently reach users as a raw CODE_IN_CAPS.
 */

export const HEADLINES: Record<string, string> = {
  ACEPHATE_NEGATIVE: "No insecticide detected",
  ACEPHATE_LOW: "Trace insecticide residue",
  ACEPHATE_PRESENT: "Insecticide residue present",
  ACEPHATE_COLD_FALSE_POSITIVE: "Possible cold-weather false positive",
  LEAD_NOT_DETECTED: "No lead detected",
  LEAD_DETECTED: "Lead detected",
  NITRATE_DEPLETED: "Nitrate depleted",
  NITRATE_OK: "Nitrate in range",
  NITRATE_HIGH: "Nitrate running high",
  NITRATE_EXCESS: "Nitrate far too high",
  NITRITE_OK: "Nitrite at trace levels",
  NITRITE_HIGH: "Nitrite elevated",
  NITRITE_EXCESS: "Nitrite far too high",
  PH_OPTIMAL: "pH in the optimal band",
  PH_SLIGHTLY_OFF: "pH slightly off",
  PH_OUT_OF_RANGE: "pH out of range",
  HARDNESS_OK: "Water hardness normal",
  HARDNESS_HIGH: "Water very hard",
  NO_GUTTATION_COLLECTED: "No droplets collected overnight",
  CHEMICAL_UNUSABLE: "Chip could not be read",
};

export const SUGGESTIONS: Record<string, string> = {
  NONE: "",
  SUGGEST_NITROGEN_FERTILIZER: "Consider a nitrogen fertilizer; the soil looks depleted.",
  SUGGEST_FLUSH_FERTILIZER: "Ease off fertilizer and flush the soil with plain water.",
  SUGGEST_TEST_BEFORE_HARVEST: "Test produce before eating, or delay the harvest.",
  SUGGEST_CHECK_WATER_SOURCE: "Check your water source; consider softening or switching.",
  SUGGEST_AMEND_SOIL_PH: "Amend the soil to bring pH back toward 6–7.",
  SUGGEST_MONITOR_SOIL_PH: "Keep an eye on soil pH over the next few readings.",
  SUGGEST_STOP_CONSUMING_PRODUCE: "Stop consuming produce from this plant and retest.",
  SUGGEST_LIMIT_SPRAYING: "Limit spraying until residue clears.",
  SUGGEST_PROTECT_POLLINATORS: "High residue: protect pollinators and pause spraying.",
  SUGGEST_RETEST_WARMER: "Retest on a warmer day; this strip misfires in the cold.",
};

/** Humanize unexpected codes instead of leaking CAPS_WITH_UNDERSCORES. */
function humanize(code: string): string {
  const text = code.replace(/^SUGGEST_/, "").replace(/_/g, " ").toLowerCase();
  return text.charAt(0).toUpperCase() + text.slice(1);
}

export function headlineText(code: string): string {
  return HEADLINES[code] ?? humanize(code);
}

export function suggestionText(code: string): string {
  return SUGGESTIONS[code] ?? humanize(code);
}
