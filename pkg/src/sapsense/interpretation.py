"""Turns measurements into traffic-light signals and suggestion codes.

The thresholds live in a versioned JSON rule table (rules_tomato_v1 ships
as the default). Rules are half-open intervals over a chemical's value,
checked to be mutually exclusive and to cover the whole number line, so
exactly one fires for any value. Headlines and suggestions are stable text
codes; display strings belong to whatever front end renders them.
"""

import json
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Dict, List, Mapping, Optional, Tuple, Union

from .calibration import Measurement
from .chip import CHEMICAL_ORDER, ChemicalKind
from .errors import OutOfRange, RuleTableError, UnknownChemical
from .imaging import ChipReading, ReadingStatus


class Signal(str, Enum):
    GREEN = "green"
    YELLOW = "yellow"
    RED = "red"
    GRAY = "gray"

    @property
    def severity(self) -> int:
        return {Signal.GREEN: 0, Signal.YELLOW: 1, Signal.RED: 2,
                Signal.GRAY: -1}[self]


@dataclass(frozen=True)
class ReadingContext:
    """Deployment conditions that modulate interpretation."""

    ambient_temperature_c: Optional[float] = None
    plant_species: str = "tomato"

    def __post_init__(self):
        t = self.ambient_temperature_c
        if t is not None and not -40.0 <= t <= 60.0:
            raise OutOfRange("ambient temperature %.1f C outside [-40, 60]" % t)


@dataclass(frozen=True)
class Rule:
    """One interval of a chemical's value range and what it means."""

    chemical: ChemicalKind
    signal: Signal
    headline: str
    suggestion: str
    rationale: str
    min_value: Optional[float] = None
    min_inclusive: bool = True
    max_value: Optional[float] = None
    max_inclusive: bool = True

    def matches(self, value: float) -> bool:
        if self.min_value is not None:
            if self.min_inclusive:
                if value < self.min_value:
                    return False
            elif value <= self.min_value:
                return False
        if self.max_value is not None:
            if self.max_inclusive:
                if value > self.max_value:
                    return False
            elif value >= self.max_value:
                return False
        return True


@dataclass(frozen=True)
class TemperatureModifier:
    """Caps a chemical's signal below a temperature (enzyme strips misfire
    in the cold, so a positive there cannot be trusted)."""

    chemical: ChemicalKind
    max_temperature_c: float
    signal_cap: Signal
    headline: str
    suggestion: str
    rationale: str

    def applies(self, context: "ReadingContext", value: float,
                base_signal: Signal) -> bool:
        # Only doubts actual positives; a negative result has nothing to cap.
        temp = context.ambient_temperature_c
        return (temp is not None and temp <= self.max_temperature_c
                and value > 0 and base_signal.severity > Signal.GREEN.severity)


@dataclass(frozen=True)
class RuleTable:
    version: str
    species: str
    rules: Mapping[ChemicalKind, Tuple[Rule, ...]]
    modifiers: Tuple[TemperatureModifier, ...] = ()

    def rules_for(self, chemical: ChemicalKind) -> Tuple[Rule, ...]:
        try:
            return self.rules[chemical]
        except KeyError:
            raise UnknownChemical("rule table %s has no rules for %s"
                                  % (self.version, chemical.value))

    def modifier_for(self, chemical: ChemicalKind) -> Optional[TemperatureModifier]:
        for modifier in self.modifiers:
            if modifier.chemical is chemical:
                return modifier
        return None


@dataclass(frozen=True)
class Interpretation:
    chemical: ChemicalKind
    signal: Signal
    headline: str
    suggestion: str
    rationale: str

    def to_dict(self) -> dict:
        return {"chemical": self.chemical.value, "signal": self.signal.value,
                "headline": self.headline, "suggestion": self.suggestion,
                "rationale": self.rationale}


@dataclass(frozen=True)
class ReportCard:
    """Six per-chemical interpretations plus the worst-of overall signal."""

    interpretations: Tuple[Interpretation, ...]
    overall: Signal
    headline: Optional[str] = None

    def interpretation_for(self, chemical: ChemicalKind) -> Interpretation:
        for item in self.interpretations:
            if item.chemical is chemical:
                return item
        raise UnknownChemical("report has no entry for %s" % chemical.value)

    def to_dict(self) -> dict:
        return {"overall": self.overall.value, "headline": self.headline,
                "interpretations": [i.to_dict() for i in self.interpretations]}


# ---------------------------------------------------------------------------
# Table loading and validation

def _rule_from_dict(chemical: ChemicalKind, doc: dict) -> Rule:
    try:
        return Rule(chemical=chemical,
                    signal=Signal(doc["signal"]),
                    headline=doc["headline"],
                    suggestion=doc["suggestion"],
                    rationale=doc.get("rationale", ""),
                    min_value=doc.get("min"),
                    min_inclusive=bool(doc.get("min_inclusive", True)),
                    max_value=doc.get("max"),
                    max_inclusive=bool(doc.get("max_inclusive", True)))
    except (KeyError, ValueError) as exc:
        raise RuleTableError("bad rule for %s: %s" % (chemical.value, exc))


def rule_table_from_dict(doc: dict) -> RuleTable:
    rules: Dict[ChemicalKind, Tuple[Rule, ...]] = {}
    for name, rule_docs in doc.get("rules", {}).items():
        chemical = ChemicalKind.from_name(name)
        rules[chemical] = tuple(_rule_from_dict(chemical, r) for r in rule_docs)
    modifiers = []
    for m in doc.get("modifiers", []):
        try:
            modifiers.append(TemperatureModifier(
                chemical=ChemicalKind.from_name(m["chemical"]),
                max_temperature_c=float(m["max_temperature_c"]),
                signal_cap=Signal(m["signal_cap"]),
                headline=m["headline"],
                suggestion=m["suggestion"],
                rationale=m.get("rationale", "")))
        except (KeyError, ValueError) as exc:
            raise RuleTableError("bad modifier: %s" % exc)
    table = RuleTable(version=doc.get("version", "unversioned"),
                      species=doc.get("species", "tomato"),
                      rules=rules, modifiers=tuple(modifiers))
    problems = validate_rule_table(table)
    if problems:
        raise RuleTableError("rule table %s invalid: %s"
                             % (table.version, "; ".join(problems)))
    return table


def validate_rule_table(table: RuleTable) -> List[str]:
    """Structural exhaustiveness/exclusivity check on each chemical's rules.

    Sorted by lower bound, the intervals must start at -inf, end at +inf,
    and meet exactly (equal boundary, exactly one side inclusive).
    """
    problems: List[str] = []
    for chemical in CHEMICAL_ORDER:
        rules = table.rules.get(chemical)
        if not rules:
            problems.append("%s: no rules" % chemical.value)
            continue
        ordered = sorted(rules, key=lambda r: (-1e300 if r.min_value is None
                                               else r.min_value))
        if ordered[0].min_value is not None:
            problems.append("%s: first rule does not start at -inf" % chemical.value)
        if ordered[-1].max_value is not None:
            problems.append("%s: last rule does not end at +inf" % chemical.value)
        for left, right in zip(ordered, ordered[1:]):
            if left.max_value is None or right.min_value is None:
                problems.append("%s: unbounded rule in the interior" % chemical.value)
                continue
            if left.max_value != right.min_value:
                problems.append("%s: gap or overlap at %s vs %s"
                                % (chemical.value, left.max_value, right.min_value))
            elif left.max_inclusive == right.min_inclusive:
                problems.append("%s: boundary %s on both or neither side"
                                % (chemical.value, left.max_value))
    return problems


@lru_cache(maxsize=None)
def default_rule_table() -> RuleTable:
    text = (resources.files("sapsense.data") / "rules_tomato_v1.json").read_text()
    return rule_table_from_dict(json.loads(text))


def load_rule_table(path) -> RuleTable:
    with open(path) as handle:
        return rule_table_from_dict(json.load(handle))


@lru_cache(maxsize=None)
def chemical_info() -> dict:
    text = (resources.files("sapsense.data") / "chemical_info.json").read_text()
    return json.loads(text)


# ---------------------------------------------------------------------------
# Interpretation

GRAY_UNUSABLE = "CHEMICAL_UNUSABLE"
GRAY_NO_GUTTATION = "NO_GUTTATION_COLLECTED"
_SPECIES_FALLBACK_NOTE = "; %s rules applied (no table for species '%s')"


def _fire(table: RuleTable, chemical: ChemicalKind, value: float) -> Rule:
    matching = [rule for rule in table.rules_for(chemical) if rule.matches(value)]
    if len(matching) != 1:
        raise RuleTableError("%d rules fire for %s=%s in table %s"
                             % (len(matching), chemical.value, value, table.version))
    return matching[0]


def interpret(measurement: Measurement,
              context: Optional[ReadingContext] = None,
              table: Optional[RuleTable] = None) -> Interpretation:
    """Map one measurement to a signal, headline and suggestion code."""
    context = context or ReadingContext()
    table = table or default_rule_table()
    rule = _fire(table, measurement.chemical, measurement.value)
    signal, headline, suggestion, rationale = (rule.signal, rule.headline,
                                               rule.suggestion, rule.rationale)

    modifier = table.modifier_for(measurement.chemical)
    if modifier is not None and modifier.applies(context, measurement.value,
                                                 rule.signal):
        if modifier.signal_cap.severity < signal.severity:
            signal = modifier.signal_cap
        headline = modifier.headline
        suggestion = modifier.suggestion
        rationale = "%s; %s" % (rationale, modifier.rationale)

    if context.plant_species != table.species:
        rationale += _SPECIES_FALLBACK_NOTE % (table.species, context.plant_species)
    return Interpretation(chemical=measurement.chemical, signal=signal,
                          headline=headline, suggestion=suggestion,
                          rationale=rationale)


def _gray(chemical: ChemicalKind, reading: ChipReading) -> Interpretation:
    if reading.validity.status is ReadingStatus.UNREACTED:
        return Interpretation(chemical, Signal.GRAY, GRAY_NO_GUTTATION, "NONE",
                              "circle stayed dry; nothing to measure")
    return Interpretation(chemical, Signal.GRAY, GRAY_UNUSABLE, "NONE",
                          "no usable measurement on this reading")


def summarize(reading: ChipReading,
              context: Optional[ReadingContext] = None,
              table: Optional[RuleTable] = None) -> ReportCard:
    """Per-chemical interpretations plus a worst-of overall signal.

    Gray chemicals stay out of the overall unless everything is Gray, in
    which case the whole card reports "no guttation collected".
    """
    context = context or ReadingContext()
    table = table or default_rule_table()
    interpretations = []
    for chemical in CHEMICAL_ORDER:
        measurement = reading.measurements.get(chemical)
        if measurement is None:
            interpretations.append(_gray(chemical, reading))
        else:
            interpretations.append(interpret(measurement, context, table))

    colored = [i.signal for i in interpretations if i.signal is not Signal.GRAY]
    if not colored:
        headline = (GRAY_NO_GUTTATION
                    if reading.validity.status is ReadingStatus.UNREACTED
                    else GRAY_UNUSABLE)
        return ReportCard(interpretations=tuple(interpretations),
                          overall=Signal.GRAY, headline=headline)
    overall = max(colored, key=lambda s: s.severity)
    return ReportCard(interpretations=tuple(interpretations), overall=overall)
