"""Layout and scale model invariants: counts, round-trips, validation findings."""

import dataclasses
import json

import pytest

from sapsense import (
    ChemicalKind,
    ChipLayout,
    Color,
    load_layout,
    load_scales,
    serialize_config,
    serialize_layout,
    validate_layout,
    validate_scales,
)
from sapsense.chip import (
    CHEMICAL_ORDER,
    CircleShape,
    RectShape,
    RegionKind,
    RegionSpec,
    ReferenceScale,
    ScaleKnot,
    default_config_text,
    shape_distance,
)
from sapsense.errors import LayoutError, UnknownChemical


def test_default_layout_shape(layout):
    assert len(layout.markers) == 4
    assert len(layout.test_circles) == 6
    assert len(layout.reference_bars) == 24
    assert len(layout.regions()) == 34


def test_default_layout_validates_clean(layout):
    assert validate_layout(layout) == []


def test_default_scales_validate_clean(scales):
    assert validate_scales(scales) == []


def test_layout_round_trip(layout):
    assert load_layout(serialize_layout(layout)) == layout


def test_combined_config_round_trip(layout, scales):
    text = serialize_config(layout, scales)
    assert load_layout(text) == layout
    assert load_scales(text) == scales


def test_one_circle_per_chemical(layout):
    chems = sorted(c.chemical for c in layout.test_circles)
    assert chems == sorted(CHEMICAL_ORDER)


def test_bars_cover_all_knots(layout):
    for chem in CHEMICAL_ORDER:
        bars = layout.bars_for(chem)
        assert [b.knot_index for b in bars] == [0, 1, 2, 3]


def test_test_circles_are_2mm_diameter(layout):
    for c in layout.test_circles:
        assert c.shape.radius == pytest.approx(1.0)


def test_marker_tags_mixed(layout):
    tags = {m.marker_tag for m in layout.markers}
    assert len(tags) >= 2


def test_default_scale_values(scale_map):
    # Anchor concentrations for the shipped panel.
    assert scale_map[ChemicalKind.NITRATE].values() == [0.0, 1.0, 5.0, 10.0]
    assert scale_map[ChemicalKind.NITRITE].values()[0] == 0.0
    assert scale_map[ChemicalKind.NITRITE].values()[-1] == 1.0
    assert scale_map[ChemicalKind.PH].values() == [5.0, 6.0, 7.0, 8.0]
    assert scale_map[ChemicalKind.ACEPHATE].values() == [0.0, 1.0, 2.0, 3.0]
    lead = scale_map[ChemicalKind.LEAD].values()
    assert 25.0 in lead and lead[-1] == 200.0
    hardness = scale_map[ChemicalKind.HARDNESS].values()
    assert hardness[0] < 100.0 < hardness[-1]


def test_acephate_is_ordinal_with_labels(scale_map):
    scale = scale_map[ChemicalKind.ACEPHATE]
    assert scale.is_ordinal
    assert [k.label for k in scale.knots] == ["negative", "low", "medium", "high"]
    assert all(not scale_map[c].is_ordinal for c in CHEMICAL_ORDER
               if c is not ChemicalKind.ACEPHATE)


def test_unknown_chemical_raises():
    with pytest.raises(UnknownChemical):
        ChemicalKind.from_name("caffeine")


def test_parse_error_reports_location():
    with pytest.raises(LayoutError) as err:
        load_layout("{\n  \"layout\": {,}\n}")
    assert "line 2" in str(err.value)


def test_missing_field_reports_path(layout):
    doc = json.loads(serialize_layout(layout))
    del doc["layout"]["chip_width_mm"]
    with pytest.raises(LayoutError) as err:
        load_layout(json.dumps(doc))
    assert "chip_width_mm" in str(err.value)


def test_bad_chemical_name_reports_path(layout):
    doc = json.loads(serialize_layout(layout))
    doc["layout"]["test_circles"][0]["chemical"] = "arsenic"
    with pytest.raises(LayoutError) as err:
        load_layout(json.dumps(doc))
    assert "arsenic" in str(err.value)


def _codes(violations):
    return {v.code for v in violations}


def test_all_circle_markers_flagged_ambiguous(layout):
    markers = tuple(
        dataclasses.replace(
            m,
            marker_tag=__import__("sapsense").MarkerTag.CIRCLE,
            shape=CircleShape(m.shape.centroid(), 1.1),
        )
        for m in layout.markers
    )
    bad = dataclasses.replace(layout, markers=markers)
    assert "marker-tags-ambiguous" in _codes(validate_layout(bad))


def test_circle_clearance_violation(layout):
    # Two test circles 0.4 mm apart, below the 0.5 mm circle-circle clearance.
    circles = list(layout.test_circles)
    a = circles[0]
    gap = 0.4
    cx, cy = a.shape.center
    moved = dataclasses.replace(
        circles[1], shape=CircleShape((cx + 2.0 * a.shape.radius + gap, cy), 1.0))
    circles[1] = moved
    bad = dataclasses.replace(layout, test_circles=tuple(circles))
    found = [v for v in validate_layout(bad) if v.code == "clearance"
             and {a.region_id, moved.region_id} == set(v.regions)]
    assert found, "expected a clearance violation for the moved circle pair"
    assert found[0].value == pytest.approx(0.4, abs=1e-6)
    assert "0.50 mm" in found[0].message


def test_out_of_bounds_region_flagged(layout):
    circles = list(layout.test_circles)
    circles[0] = dataclasses.replace(circles[0], shape=CircleShape((50.0, 5.0), 1.0))
    bad = dataclasses.replace(layout, test_circles=tuple(circles))
    assert "out-of-bounds" in _codes(validate_layout(bad))


def test_validation_findings_are_data_not_exceptions(layout):
    bad = dataclasses.replace(layout, markers=layout.markers[:2])
    violations = validate_layout(bad)
    assert violations and all(hasattr(v, "code") for v in violations)


def _scale(chem, values, colors):
    return ReferenceScale(chem, "ppm", tuple(
        ScaleKnot(v, Color.from_sequence(c)) for v, c in zip(values, colors)))


def test_scale_monotone_violation():
    s = _scale(ChemicalKind.NITRATE, [0, 5, 5, 10],
               [[0.9, 0.9, 0.9], [0.7, 0.7, 0.7], [0.5, 0.5, 0.5], [0.3, 0.3, 0.3]])
    assert "scale-monotone" in {v.code for v in validate_scales([s])}


def test_scale_close_colors_violation():
    s = _scale(ChemicalKind.NITRATE, [0, 1, 5, 10],
               [[0.9, 0.9, 0.9], [0.9, 0.9, 0.895], [0.5, 0.5, 0.5], [0.3, 0.3, 0.3]])
    assert "scale-colors-close" in {v.code for v in validate_scales([s])}


def test_scale_ordinal_values_enforced():
    s = _scale(ChemicalKind.ACEPHATE, [0, 1, 2, 4],
               [[0.9, 0.9, 0.9], [0.7, 0.7, 0.7], [0.5, 0.5, 0.5], [0.3, 0.3, 0.3]])
    assert "scale-ordinal-values" in {v.code for v in validate_scales([s])}


def test_scale_color_range_violation():
    s = _scale(ChemicalKind.NITRATE, [0, 1, 5, 10],
               [[0.9, 0.9, 1.2], [0.7, 0.7, 0.7], [0.5, 0.5, 0.5], [0.3, 0.3, 0.3]])
    assert "scale-color-range" in {v.code for v in validate_scales([s])}


def test_shape_distance_circle_rect():
    c = CircleShape((0.0, 0.0), 1.0)
    r = RectShape((2.0, -0.5), 1.0, 1.0)
    assert shape_distance(c, r) == pytest.approx(1.0)
    assert shape_distance(r, c) == pytest.approx(1.0)


def test_default_config_is_single_json_document():
    doc = json.loads(default_config_text())
    assert set(doc) >= {"layout", "scales"}
