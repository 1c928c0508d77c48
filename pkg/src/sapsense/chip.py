"""Chip geometry and reference-scale models.

All chip coordinates are millimetres in a frame anchored at the centre of the
top-left corner marker, x growing rightwards and y growing downwards (image
convention). A layout describes where things sit on the physical chip: four
corner fiducial markers, six test circles (one per supported chemical) and
24 printed reference bars (four calibration knots per chemical). Reference
scales pair each chemical's four knot concentrations with the RGB color the
printed bar shows, which is what quantification calibrates against.

Layouts and scales travel together in a single UTF-8 JSON document; see
docs/layout.schema.md for the prose schema.
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import LayoutError, UnknownChemical


class ChemicalKind(str, Enum):
    ACEPHATE = "acephate"
    LEAD = "lead"
    NITRATE = "nitrate"
    NITRITE = "nitrite"
    PH = "ph"
    HARDNESS = "hardness"

    @property
    def is_ordinal(self) -> bool:
        # Acephate reads as discrete levels; everything else is continuous.
        return self is ChemicalKind.ACEPHATE

    @classmethod
    def from_name(cls, name: str) -> "ChemicalKind":
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise UnknownChemical("unknown chemical %r (supported: %s)"
                                  % (name, ", ".join(c.value for c in cls)))


# Display and iteration order used everywhere a full panel is reported.
CHEMICAL_ORDER = (
    ChemicalKind.ACEPHATE,
    ChemicalKind.LEAD,
    ChemicalKind.NITRATE,
    ChemicalKind.NITRITE,
    ChemicalKind.PH,
    ChemicalKind.HARDNESS,
)


@dataclass(frozen=True)
class Color:
    """An RGB color with channels in [0, 1]."""

    r: float
    g: float
    b: float

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.r, self.g, self.b)

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.g, self.b], dtype=np.float64)

    def distance_to(self, other: "Color") -> float:
        return math.sqrt((self.r - other.r) ** 2
                         + (self.g - other.g) ** 2
                         + (self.b - other.b) ** 2)

    @classmethod
    def from_sequence(cls, seq: Sequence[float]) -> "Color":
        if len(seq) != 3:
            raise ValueError("color needs exactly 3 channels, got %r" % (seq,))
        return cls(float(seq[0]), float(seq[1]), float(seq[2]))


@dataclass(frozen=True)
class ScaleKnot:
    value: float
    color: Color
    label: Optional[str] = None


@dataclass(frozen=True)
class ReferenceScale:
    """Four-point calibration scale for one chemical."""

    chemical: ChemicalKind
    unit: str
    knots: Tuple[ScaleKnot, ...]

    def values(self) -> List[float]:
        return [k.value for k in self.knots]

    def colors(self) -> List[Color]:
        return [k.color for k in self.knots]

    def colors_array(self) -> np.ndarray:
        return np.array([k.color.as_tuple() for k in self.knots], dtype=np.float64)

    @property
    def span(self) -> float:
        return self.knots[-1].value - self.knots[0].value

    @property
    def is_ordinal(self) -> bool:
        return self.chemical.is_ordinal


class RegionKind(str, Enum):
    TEST_CIRCLE = "test_circle"
    REFERENCE_BAR = "reference_bar"
    MARKER = "marker"


class MarkerTag(str, Enum):
    TRIANGLE = "triangle"
    SQUARE = "square"
    CIRCLE = "circle"


@dataclass(frozen=True)
class CircleShape:
    center: Tuple[float, float]
    radius: float

    kind = "circle"

    def centroid(self) -> Tuple[float, float]:
        return self.center

    def bounds(self) -> Tuple[float, float, float, float]:
        cx, cy = self.center
        r = self.radius
        return (cx - r, cy - r, cx + r, cy + r)

    def polygon(self, segments: int = 64) -> np.ndarray:
        cx, cy = self.center
        ang = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
        return np.stack([cx + self.radius * np.cos(ang),
                         cy + self.radius * np.sin(ang)], axis=1)


@dataclass(frozen=True)
class RectShape:
    corner: Tuple[float, float]  # top-left (min x, min y)
    width: float
    height: float

    kind = "rectangle"

    def centroid(self) -> Tuple[float, float]:
        x, y = self.corner
        return (x + self.width / 2.0, y + self.height / 2.0)

    def bounds(self) -> Tuple[float, float, float, float]:
        x, y = self.corner
        return (x, y, x + self.width, y + self.height)

    def polygon(self, segments: int = 0) -> np.ndarray:
        x, y = self.corner
        w, h = self.width, self.height
        return np.array([[x, y], [x + w, y], [x + w, y + h], [x, y + h]],
                        dtype=np.float64)


@dataclass(frozen=True)
class PolygonShape:
    vertices: Tuple[Tuple[float, float], ...]

    kind = "polygon"

    def centroid(self) -> Tuple[float, float]:
        # Area centroid (shoelace); affine maps carry it to the image-space
        # area centroid, which is what contour moments measure.
        pts = list(self.vertices)
        a2 = 0.0
        cx = 0.0
        cy = 0.0
        for (x0, y0), (x1, y1) in zip(pts, pts[1:] + pts[:1]):
            cross = x0 * y1 - x1 * y0
            a2 += cross
            cx += (x0 + x1) * cross
            cy += (y0 + y1) * cross
        if abs(a2) < 1e-12:
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            return (sum(xs) / len(xs), sum(ys) / len(ys))
        return (cx / (3.0 * a2), cy / (3.0 * a2))

    def bounds(self) -> Tuple[float, float, float, float]:
        xs = [p[0] for p in self.vertices]
        ys = [p[1] for p in self.vertices]
        return (min(xs), min(ys), max(xs), max(ys))

    def polygon(self, segments: int = 0) -> np.ndarray:
        return np.array(self.vertices, dtype=np.float64)


@dataclass(frozen=True)
class RegionSpec:
    """One placed feature on the chip."""

    region_id: str
    kind: RegionKind
    shape: object  # CircleShape | RectShape | PolygonShape
    chemical: Optional[ChemicalKind] = None
    knot_index: Optional[int] = None
    marker_tag: Optional[MarkerTag] = None

    def centroid(self) -> Tuple[float, float]:
        return self.shape.centroid()


@dataclass(frozen=True)
class Clearances:
    """Minimum edge-to-edge distances between placed regions, in mm."""

    bar_to_circle: float = 0.3
    circle_to_circle: float = 0.5
    other: float = 0.3


@dataclass(frozen=True)
class ChipLayout:
    chip_width_mm: float
    chip_height_mm: float
    origin_margin_mm: float
    clearances: Clearances
    markers: Tuple[RegionSpec, ...]
    test_circles: Tuple[RegionSpec, ...]
    reference_bars: Tuple[RegionSpec, ...]

    def regions(self) -> Tuple[RegionSpec, ...]:
        return self.markers + self.test_circles + self.reference_bars

    def bounds(self) -> Tuple[float, float, float, float]:
        m = self.origin_margin_mm
        return (-m, -m, self.chip_width_mm - m, self.chip_height_mm - m)

    def circle_for(self, chemical: ChemicalKind) -> RegionSpec:
        for region in self.test_circles:
            if region.chemical is chemical:
                return region
        raise UnknownChemical("layout has no test circle for %s" % chemical.value)

    def bars_for(self, chemical: ChemicalKind) -> List[RegionSpec]:
        bars = [r for r in self.reference_bars if r.chemical is chemical]
        bars.sort(key=lambda r: r.knot_index if r.knot_index is not None else -1)
        return bars


@dataclass(frozen=True)
class Violation:
    """One broken layout/scale invariant, as data rather than an exception."""

    code: str
    message: str
    regions: Tuple[str, ...] = ()
    value: Optional[float] = None

    def __str__(self):
        parts = [self.code, self.message]
        if self.regions:
            parts.append("regions=" + ",".join(self.regions))
        if self.value is not None:
            parts.append("value=%.4f" % self.value)
        return ": ".join(parts[:2]) + (" (" + "; ".join(parts[2:]) + ")" if parts[2:] else "")


# ---------------------------------------------------------------------------
# Shape-to-shape distances (used only by validation, so clarity over speed;
# a bounding-box prefilter keeps the 34-region pairwise sweep cheap).

def _point_in_polygon(pt, poly) -> bool:
    x, y = pt
    inside = False
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        if (y0 > y) != (y1 > y):
            t = (y - y0) / (y1 - y0)
            if x < x0 + t * (x1 - x0):
                inside = not inside
    return inside


def _segment_distance(p0, p1, q0, q1) -> float:
    def clamp01(v):
        return max(0.0, min(1.0, v))

    def point_seg(p, a, b):
        ab = (b[0] - a[0], b[1] - a[1])
        ap = (p[0] - a[0], p[1] - a[1])
        denom = ab[0] ** 2 + ab[1] ** 2
        t = clamp01((ap[0] * ab[0] + ap[1] * ab[1]) / denom) if denom > 0 else 0.0
        dx = p[0] - (a[0] + t * ab[0])
        dy = p[1] - (a[1] + t * ab[1])
        return math.hypot(dx, dy)

    return min(point_seg(p0, q0, q1), point_seg(p1, q0, q1),
               point_seg(q0, p0, p1), point_seg(q1, p0, p1))


def _polygon_distance(pa: np.ndarray, pb: np.ndarray) -> float:
    pa_list = [tuple(p) for p in pa]
    pb_list = [tuple(p) for p in pb]
    if _point_in_polygon(pa_list[0], pb_list) or _point_in_polygon(pb_list[0], pa_list):
        return 0.0
    best = float("inf")
    na, nb = len(pa_list), len(pb_list)
    for i in range(na):
        a0, a1 = pa_list[i], pa_list[(i + 1) % na]
        for j in range(nb):
            b0, b1 = pb_list[j], pb_list[(j + 1) % nb]
            d = _segment_distance(a0, a1, b0, b1)
            if d < best:
                best = d
    return best


def shape_distance(a, b) -> float:
    """Edge-to-edge distance between two shapes; 0 when they overlap."""
    if isinstance(a, CircleShape) and isinstance(b, CircleShape):
        gap = math.dist(a.center, b.center) - a.radius - b.radius
        return max(0.0, gap)
    if isinstance(a, CircleShape) and isinstance(b, RectShape):
        x0, y0, x1, y1 = b.bounds()
        cx, cy = a.center
        dx = max(x0 - cx, 0.0, cx - x1)
        dy = max(y0 - cy, 0.0, cy - y1)
        return max(0.0, math.hypot(dx, dy) - a.radius)
    if isinstance(a, RectShape) and isinstance(b, CircleShape):
        return shape_distance(b, a)
    if isinstance(a, RectShape) and isinstance(b, RectShape):
        ax0, ay0, ax1, ay1 = a.bounds()
        bx0, by0, bx1, by1 = b.bounds()
        dx = max(bx0 - ax1, ax0 - bx1, 0.0)
        dy = max(by0 - ay1, ay0 - by1, 0.0)
        return math.hypot(dx, dy)
    return _polygon_distance(a.polygon(64), b.polygon(64))


def _bounds_gap(a, b) -> float:
    ax0, ay0, ax1, ay1 = a.bounds()
    bx0, by0, bx1, by1 = b.bounds()
    dx = max(bx0 - ax1, ax0 - bx1, 0.0)
    dy = max(by0 - ay1, ay0 - by1, 0.0)
    return math.hypot(dx, dy)


# ---------------------------------------------------------------------------
# Validation

def _required_clearance(a: RegionSpec, b: RegionSpec, c: Clearances) -> float:
    kinds = {a.kind, b.kind}
    if kinds == {RegionKind.TEST_CIRCLE}:
        return c.circle_to_circle
    if kinds == {RegionKind.TEST_CIRCLE, RegionKind.REFERENCE_BAR}:
        return c.bar_to_circle
    return c.other


def validate_layout(layout: ChipLayout) -> List[Violation]:
    """Check every layout invariant; returns findings instead of raising."""
    v: List[Violation] = []

    if len(layout.markers) != 4:
        v.append(Violation("marker-count",
                           "layout needs exactly 4 markers, found %d" % len(layout.markers),
                           tuple(m.region_id for m in layout.markers)))
    tags = [m.marker_tag for m in layout.markers if m.marker_tag is not None]
    for m in layout.markers:
        if m.marker_tag is None:
            v.append(Violation("marker-tag-missing",
                               "marker lacks a shape tag", (m.region_id,)))
        if m.chemical is not None or m.knot_index is not None:
            v.append(Violation("field-unexpected",
                               "markers carry neither chemical nor knot index",
                               (m.region_id,)))
    if len(set(tags)) < 2 and len(layout.markers) >= 2:
        v.append(Violation("marker-tags-ambiguous",
                           "marker identities ambiguous: need at least two distinct "
                           "shape tags, found %s" % sorted({t.value for t in tags}),
                           tuple(m.region_id for m in layout.markers)))
    for m in layout.markers:
        if m.marker_tag is None:
            continue
        shape = m.shape
        ok = ((m.marker_tag is MarkerTag.CIRCLE and isinstance(shape, CircleShape))
              or (m.marker_tag is MarkerTag.SQUARE and isinstance(shape, RectShape)
                  and min(shape.width, shape.height) > 0
                  and 0.8 <= shape.width / shape.height <= 1.25)
              or (m.marker_tag is MarkerTag.TRIANGLE and isinstance(shape, PolygonShape)
                  and len(shape.vertices) == 3))
        if not ok:
            v.append(Violation("marker-shape-mismatch",
                               "marker tagged %r but geometry does not match"
                               % m.marker_tag.value, (m.region_id,)))

    if len(layout.test_circles) != 6:
        v.append(Violation("circle-count",
                           "layout needs exactly 6 test circles, found %d"
                           % len(layout.test_circles)))
    seen_chems: Dict[ChemicalKind, str] = {}
    for c in layout.test_circles:
        if c.chemical is None:
            v.append(Violation("field-missing", "test circle lacks a chemical",
                               (c.region_id,)))
            continue
        if c.chemical in seen_chems:
            v.append(Violation("circle-chemical-duplicate",
                               "chemical %s has more than one test circle" % c.chemical.value,
                               (seen_chems[c.chemical], c.region_id)))
        seen_chems[c.chemical] = c.region_id
        if not isinstance(c.shape, CircleShape) or c.shape.radius <= 0:
            v.append(Violation("shape-dims", "test circle must be a circle with "
                               "positive radius", (c.region_id,)))
    for chem in CHEMICAL_ORDER:
        if chem not in seen_chems and len(layout.test_circles) == 6:
            v.append(Violation("chemical-missing",
                               "no test circle for %s" % chem.value))

    if len(layout.reference_bars) != 24:
        v.append(Violation("bar-count",
                           "layout needs exactly 24 reference bars, found %d"
                           % len(layout.reference_bars)))
    knots_by_chem: Dict[ChemicalKind, List[int]] = {}
    for b in layout.reference_bars:
        if b.chemical is None or b.knot_index is None:
            v.append(Violation("field-missing",
                               "reference bar needs chemical and knot index",
                               (b.region_id,)))
            continue
        if not 0 <= b.knot_index <= 3:
            v.append(Violation("knot-index-range",
                               "knot index %d outside 0..3" % b.knot_index,
                               (b.region_id,), float(b.knot_index)))
        knots_by_chem.setdefault(b.chemical, []).append(b.knot_index)
    for chem, idx in sorted(knots_by_chem.items(), key=lambda kv: kv[0].value):
        if sorted(idx) != [0, 1, 2, 3]:
            v.append(Violation("bar-knots",
                               "chemical %s needs knot indices 0,1,2,3 exactly once, "
                               "found %s" % (chem.value, sorted(idx))))

    ids = [r.region_id for r in layout.regions()]
    for rid in sorted({i for i in ids if ids.count(i) > 1}):
        v.append(Violation("region-id-duplicate", "duplicate region id", (rid,)))

    bx0, by0, bx1, by1 = layout.bounds()
    for r in layout.regions():
        x0, y0, x1, y1 = r.shape.bounds()
        if x0 < bx0 - 1e-9 or y0 < by0 - 1e-9 or x1 > bx1 + 1e-9 or y1 > by1 + 1e-9:
            v.append(Violation("out-of-bounds",
                               "region extends outside the chip", (r.region_id,)))

    regions = layout.regions()
    for i in range(len(regions)):
        for j in range(i + 1, len(regions)):
            a, b = regions[i], regions[j]
            need = _required_clearance(a, b, layout.clearances)
            if _bounds_gap(a.shape, b.shape) >= need:
                continue
            got = shape_distance(a.shape, b.shape)
            if got < need - 1e-9:
                v.append(Violation("clearance",
                                   "regions %.2f mm apart, clearance requires %.2f mm"
                                   % (got, need),
                                   (a.region_id, b.region_id), got))
    return v


MIN_KNOT_COLOR_DISTANCE = 0.02


def validate_scale(scale: ReferenceScale) -> List[Violation]:
    v: List[Violation] = []
    name = scale.chemical.value
    if len(scale.knots) != 4:
        v.append(Violation("scale-knot-count",
                           "scale %s needs exactly 4 knots, found %d"
                           % (name, len(scale.knots))))
        return v
    values = scale.values()
    if any(b <= a for a, b in zip(values, values[1:])):
        v.append(Violation("scale-monotone",
                           "scale %s knot values must be strictly increasing: %s"
                           % (name, values)))
    if scale.is_ordinal and values != [0.0, 1.0, 2.0, 3.0]:
        v.append(Violation("scale-ordinal-values",
                           "ordinal scale %s must use level values [0, 1, 2, 3], "
                           "found %s" % (name, values)))
    for k in scale.knots:
        for ch in k.color.as_tuple():
            if not 0.0 <= ch <= 1.0:
                v.append(Violation("scale-color-range",
                                   "scale %s knot %r color channel %.3f outside [0, 1]"
                                   % (name, k.value, ch), value=ch))
    for i in range(4):
        for j in range(i + 1, 4):
            d = scale.knots[i].color.distance_to(scale.knots[j].color)
            if d < MIN_KNOT_COLOR_DISTANCE:
                v.append(Violation("scale-colors-close",
                                   "scale %s knots %d and %d are %.4f apart in RGB, "
                                   "below %.2f" % (name, i, j, d, MIN_KNOT_COLOR_DISTANCE),
                                   value=d))
    return v


def validate_scales(scales: Sequence[ReferenceScale]) -> List[Violation]:
    v: List[Violation] = []
    seen: Dict[ChemicalKind, int] = {}
    for s in scales:
        seen[s.chemical] = seen.get(s.chemical, 0) + 1
        v.extend(validate_scale(s))
    for chem, n in sorted(seen.items(), key=lambda kv: kv[0].value):
        if n > 1:
            v.append(Violation("scale-duplicate",
                               "chemical %s has %d scales" % (chem.value, n)))
    for chem in CHEMICAL_ORDER:
        if chem not in seen:
            v.append(Violation("scale-missing", "no scale for %s" % chem.value))
    return v


# ---------------------------------------------------------------------------
# JSON (de)serialization

def _shape_to_dict(shape) -> dict:
    if isinstance(shape, CircleShape):
        return {"kind": "circle", "center": list(shape.center), "radius": shape.radius}
    if isinstance(shape, RectShape):
        return {"kind": "rectangle", "corner": list(shape.corner),
                "width": shape.width, "height": shape.height}
    if isinstance(shape, PolygonShape):
        return {"kind": "polygon", "vertices": [list(p) for p in shape.vertices]}
    raise TypeError("unknown shape %r" % (shape,))


def _shape_from_dict(d: dict, path: str):
    kind = d.get("kind")
    try:
        if kind == "circle":
            cx, cy = d["center"]
            return CircleShape((float(cx), float(cy)), float(d["radius"]))
        if kind == "rectangle":
            x, y = d["corner"]
            return RectShape((float(x), float(y)), float(d["width"]), float(d["height"]))
        if kind == "polygon":
            verts = tuple((float(x), float(y)) for x, y in d["vertices"])
            if len(verts) < 3:
                raise LayoutError("%s: polygon needs at least 3 vertices" % path)
            return PolygonShape(verts)
    except (KeyError, TypeError, ValueError) as exc:
        raise LayoutError("%s: bad shape fields (%s)" % (path, exc))
    raise LayoutError("%s: shape kind must be circle, rectangle or polygon, got %r"
                      % (path, kind))


def _region_to_dict(region: RegionSpec) -> dict:
    d = {"id": region.region_id, "shape": _shape_to_dict(region.shape)}
    if region.marker_tag is not None:
        d["shape_tag"] = region.marker_tag.value
    if region.chemical is not None:
        d["chemical"] = region.chemical.value
    if region.knot_index is not None:
        d["knot_index"] = region.knot_index
    return d


def _region_from_dict(d: dict, kind: RegionKind, path: str) -> RegionSpec:
    if not isinstance(d, dict):
        raise LayoutError("%s: expected an object, got %r" % (path, type(d).__name__))
    rid = d.get("id")
    if not isinstance(rid, str) or not rid:
        raise LayoutError("%s.id: expected a non-empty string" % path)
    if "shape" not in d:
        raise LayoutError("%s.shape: missing" % path)
    shape = _shape_from_dict(d["shape"], path + ".shape")
    chemical = None
    if "chemical" in d:
        try:
            chemical = ChemicalKind.from_name(d["chemical"])
        except UnknownChemical as exc:
            raise LayoutError("%s.chemical: %s" % (path, exc))
    knot_index = None
    if "knot_index" in d:
        if not isinstance(d["knot_index"], int):
            raise LayoutError("%s.knot_index: expected an integer" % path)
        knot_index = d["knot_index"]
    marker_tag = None
    if "shape_tag" in d:
        try:
            marker_tag = MarkerTag(str(d["shape_tag"]).lower())
        except ValueError:
            raise LayoutError("%s.shape_tag: must be triangle, square or circle, got %r"
                              % (path, d["shape_tag"]))
    return RegionSpec(rid, kind, shape, chemical, knot_index, marker_tag)


def layout_to_dict(layout: ChipLayout) -> dict:
    return {
        "chip_width_mm": layout.chip_width_mm,
        "chip_height_mm": layout.chip_height_mm,
        "origin_margin_mm": layout.origin_margin_mm,
        "clearances_mm": {
            "bar_to_circle": layout.clearances.bar_to_circle,
            "circle_to_circle": layout.clearances.circle_to_circle,
            "other": layout.clearances.other,
        },
        "markers": [_region_to_dict(r) for r in layout.markers],
        "test_circles": [_region_to_dict(r) for r in layout.test_circles],
        "reference_bars": [_region_to_dict(r) for r in layout.reference_bars],
    }


def _float_field(d: dict, key: str, path: str) -> float:
    if key not in d:
        raise LayoutError("%s.%s: missing" % (path, key))
    val = d[key]
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise LayoutError("%s.%s: expected a number, got %r" % (path, key, val))
    return float(val)


def layout_from_dict(doc: dict, path: str = "layout") -> ChipLayout:
    if not isinstance(doc, dict):
        raise LayoutError("%s: expected an object" % path)
    clear_doc = doc.get("clearances_mm", {})
    if not isinstance(clear_doc, dict):
        raise LayoutError("%s.clearances_mm: expected an object" % path)
    clearances = Clearances(
        bar_to_circle=float(clear_doc.get("bar_to_circle", 0.3)),
        circle_to_circle=float(clear_doc.get("circle_to_circle", 0.5)),
        other=float(clear_doc.get("other", 0.3)),
    )
    lists = {}
    for key, kind in (("markers", RegionKind.MARKER),
                      ("test_circles", RegionKind.TEST_CIRCLE),
                      ("reference_bars", RegionKind.REFERENCE_BAR)):
        raw = doc.get(key)
        if not isinstance(raw, list):
            raise LayoutError("%s.%s: expected a list" % (path, key))
        lists[key] = tuple(_region_from_dict(item, kind, "%s.%s[%d]" % (path, key, i))
                           for i, item in enumerate(raw))
    return ChipLayout(
        chip_width_mm=_float_field(doc, "chip_width_mm", path),
        chip_height_mm=_float_field(doc, "chip_height_mm", path),
        origin_margin_mm=_float_field(doc, "origin_margin_mm", path),
        clearances=clearances,
        markers=lists["markers"],
        test_circles=lists["test_circles"],
        reference_bars=lists["reference_bars"],
    )


def scale_to_dict(scale: ReferenceScale) -> dict:
    knots = []
    for k in scale.knots:
        kd = {"value": k.value, "color": list(k.color.as_tuple())}
        if k.label is not None:
            kd["label"] = k.label
        knots.append(kd)
    return {"chemical": scale.chemical.value, "unit": scale.unit, "knots": knots}


def scale_from_dict(d: dict, path: str = "scale") -> ReferenceScale:
    if not isinstance(d, dict):
        raise LayoutError("%s: expected an object" % path)
    try:
        chemical = ChemicalKind.from_name(d.get("chemical"))
    except UnknownChemical as exc:
        raise LayoutError("%s.chemical: %s" % (path, exc))
    unit = d.get("unit")
    if not isinstance(unit, str):
        raise LayoutError("%s.unit: expected a string" % path)
    raw_knots = d.get("knots")
    if not isinstance(raw_knots, list):
        raise LayoutError("%s.knots: expected a list" % path)
    knots = []
    for i, kd in enumerate(raw_knots):
        kpath = "%s.knots[%d]" % (path, i)
        if not isinstance(kd, dict):
            raise LayoutError("%s: expected an object" % kpath)
        value = _float_field(kd, "value", kpath)
        color_raw = kd.get("color")
        if not isinstance(color_raw, (list, tuple)) or len(color_raw) != 3:
            raise LayoutError("%s.color: expected [r, g, b]" % kpath)
        label = kd.get("label")
        if label is not None and not isinstance(label, str):
            raise LayoutError("%s.label: expected a string" % kpath)
        knots.append(ScaleKnot(value, Color.from_sequence(color_raw), label))
    return ReferenceScale(chemical, unit, tuple(knots))


def _parse_json(text: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise LayoutError("config parse error at line %d column %d: %s"
                          % (exc.lineno, exc.colno, exc.msg))


def load_layout(config_text: str) -> ChipLayout:
    """Parse and validate a chip layout from JSON text.

    Accepts either a combined config document with a top-level "layout" key
    or a bare layout object. Raises LayoutError with the offending field on
    parse problems and with the full violation list on invariant problems.
    """
    doc = _parse_json(config_text)
    if isinstance(doc, dict) and "layout" in doc:
        doc = doc["layout"]
    layout = layout_from_dict(doc)
    violations = validate_layout(layout)
    if violations:
        raise LayoutError("layout failed validation:\n  "
                          + "\n  ".join(str(x) for x in violations), violations)
    return layout


def load_scales(config_text: str) -> List[ReferenceScale]:
    """Parse and validate reference scales from JSON text."""
    doc = _parse_json(config_text)
    if isinstance(doc, dict) and "scales" in doc:
        doc = doc["scales"]
    if not isinstance(doc, list):
        raise LayoutError("scales: expected a list")
    scales = [scale_from_dict(d, "scales[%d]" % i) for i, d in enumerate(doc)]
    violations = validate_scales(scales)
    if violations:
        raise LayoutError("scales failed validation:\n  "
                          + "\n  ".join(str(x) for x in violations), violations)
    return scales


def serialize_layout(layout: ChipLayout) -> str:
    return json.dumps({"layout": layout_to_dict(layout)}, indent=2, sort_keys=True)


def serialize_config(layout: ChipLayout, scales: Sequence[ReferenceScale]) -> str:
    return json.dumps({
        "layout": layout_to_dict(layout),
        "scales": [scale_to_dict(s) for s in scales],
    }, indent=2, sort_keys=True)


def default_config_text() -> str:
    return resources.files("sapsense").joinpath("data/default_chip.json").read_text("utf-8")


def default_layout() -> ChipLayout:
    return load_layout(default_config_text())


def default_scales() -> List[ReferenceScale]:
    return load_scales(default_config_text())


def scales_by_chemical(scales: Sequence[ReferenceScale]) -> Dict[ChemicalKind, ReferenceScale]:
    return {s.chemical: s for s in scales}
