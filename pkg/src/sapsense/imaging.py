"""Image analysis: fiducials, rectification, color sampling, chip reading.

The pipeline goes photo -> corner marker detection -> least-squares affine
from chip millimetres to pixels -> per-region color sampling -> validity
assessment -> quantification. Marker detection keys on shape (triangle,
square, circle) rather than texture: the printed fiducials are the only
near-black blobs of plausible size, and a polygon approximation of each
candidate contour tells the three shapes apart at any rotation.

Pixel coordinates are centre-of-pixel: coordinate (i, j) is the centre of
pixel column i, row j, matching OpenCV contour moments.
"""

import io
import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import cv2
import numpy as np
from PIL import Image, ImageOps, UnidentifiedImageError

from .calibration import Measurement, quantify
from .chip import (
    CHEMICAL_ORDER,
    ChemicalKind,
    ChipLayout,
    CircleShape,
    Color,
    MarkerTag,
    PolygonShape,
    RectShape,
    ReferenceScale,
    RegionSpec,
    scales_by_chemical,
)
from .errors import (
    AmbiguousAssignment,
    DegenerateColors,
    DegenerateGeometry,
    EmptyRegion,
    ImageDecodeError,
    InsufficientMarkers,
    PipelineError,
    RegionOutOfImage,
)

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

# Isoperimetric ratio 4*pi*A/P^2 of each ideal marker shape, for scoring.
_IDEAL_ISOPERIMETRIC = {
    MarkerTag.TRIANGLE: math.pi * math.sqrt(3.0) / 9.0,
    MarkerTag.SQUARE: math.pi / 4.0,
    MarkerTag.CIRCLE: 1.0,
}


@dataclass(frozen=True)
class AnalysisConfig:
    """Tunables for the analysis pipeline; defaults match the shipped chip."""

    nominal_px_per_mm: float = 20.0
    scale_bounds: Tuple[float, float] = (0.25, 4.0)
    dry_color: Color = Color(0.92, 0.92, 0.88)
    epsilon_dry: float = 0.03
    max_bar_dispersion: float = 0.2
    circle_sample_fraction: float = 0.5    # of the radius
    bar_sample_area_fraction: float = 0.6  # of the area
    marker_max_luminance: float = 0.30     # candidate interior must be darker
    min_image_side: int = 64
    curve_family: str = "cubic"
    rectify_accept_rms_px: float = 3.0


@dataclass(frozen=True)
class MarkerDetection:
    tag: MarkerTag
    centroid_px: Tuple[float, float]
    score: float
    area_px: float

    def to_dict(self) -> dict:
        return {"tag": self.tag.value,
                "centroid_px": [self.centroid_px[0], self.centroid_px[1]],
                "score": round(self.score, 4), "area_px": self.area_px}


class AffineTransform:
    """2x3 affine map from chip millimetres to image pixels."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=np.float64).reshape(2, 3)

    @property
    def linear(self) -> np.ndarray:
        return self.matrix[:, :2]

    @property
    def offset(self) -> np.ndarray:
        return self.matrix[:, 2]

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.linear))

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        squeeze = pts.ndim == 1
        pts = np.atleast_2d(pts)
        out = pts @ self.linear.T + self.offset
        return out[0] if squeeze else out

    def inverse(self) -> "AffineTransform":
        inv = np.linalg.inv(self.linear)
        return AffineTransform(np.hstack([inv, (-inv @ self.offset)[:, None]]))

    @classmethod
    def fit(cls, src_mm, dst_px) -> Tuple["AffineTransform", float]:
        """Least-squares fit; returns the transform and its RMS residual, px."""
        src = np.asarray(src_mm, dtype=np.float64)
        dst = np.asarray(dst_px, dtype=np.float64)
        design = np.hstack([src, np.ones((len(src), 1))])
        sol, *_ = np.linalg.lstsq(design, dst, rcond=None)
        transform = cls(sol.T)
        residual = dst - transform.apply(src)
        rms = float(np.sqrt(np.mean(np.sum(residual ** 2, axis=1))))
        return transform, rms


@dataclass(frozen=True)
class ColorSample:
    """Color estimate for one region: channelwise mean plus spread."""

    mean: Color
    dispersion: Tuple[float, float, float]
    pixel_count: int

    @property
    def max_dispersion(self) -> float:
        return max(self.dispersion)

    def to_dict(self) -> dict:
        return {"mean": list(self.mean.as_tuple()),
                "dispersion": list(self.dispersion),
                "pixel_count": self.pixel_count}


class ReadingStatus(str, Enum):
    REACTED = "reacted"
    UNREACTED = "unreacted"
    PARTIAL = "partial"
    UNREADABLE = "unreadable"


@dataclass(frozen=True)
class ValidityAssessment:
    status: ReadingStatus
    per_chemical: Dict[ChemicalKind, bool]
    notes: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"status": self.status.value,
                "per_chemical": {c.value: self.per_chemical.get(c, False)
                                 for c in CHEMICAL_ORDER},
                "notes": list(self.notes)}


@dataclass(frozen=True)
class RectificationResult:
    transform: AffineTransform
    residual_px: float
    assignment: Dict[str, MarkerDetection]


@dataclass
class ChipReading:
    """Everything measured from one chip photo."""

    measurements: Dict[ChemicalKind, Measurement]
    validity: ValidityAssessment
    rectification_residual_px: float
    diagnostics: dict

    @property
    def status(self) -> ReadingStatus:
        return self.validity.status

    def to_dict(self) -> dict:
        return {
            "status": self.validity.status.value,
            "measurements": {c.value: self.measurements[c].to_dict()
                             for c in CHEMICAL_ORDER if c in self.measurements},
            "validity": self.validity.to_dict(),
            "rectification_residual_px": self.rectification_residual_px,
            "diagnostics": self.diagnostics,
        }


# ---------------------------------------------------------------------------
# Decoding

def decode_image(data: Union[bytes, str]) -> np.ndarray:
    """Decode PNG/JPEG bytes or a file path to an RGB uint8 array.

    EXIF orientation is applied so that detection always sees the scene the
    way the camera did.
    """
    try:
        if isinstance(data, (bytes, bytearray)):
            img = Image.open(io.BytesIO(data))
        else:
            img = Image.open(data)
        img = ImageOps.exif_transpose(img)
        return np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageDecodeError("could not decode image: %s" % exc)


def _as_rgb_array(image, min_side: int) -> np.ndarray:
    if isinstance(image, (bytes, bytearray, str)):
        arr = decode_image(image)
    else:
        arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageDecodeError("expected an RGB image, got shape %s" % (arr.shape,))
    if min(arr.shape[0], arr.shape[1]) < min_side:
        raise ImageDecodeError("image %dx%d smaller than minimum side %d px"
                               % (arr.shape[1], arr.shape[0], min_side))
    if arr.dtype != np.uint8:
        arr = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)
        arr = (arr * 255.0).round().astype(np.uint8)
    return arr


# ---------------------------------------------------------------------------
# Fiducial detection

def _marker_diameter_mm(layout: ChipLayout) -> float:
    sizes = []
    for m in layout.markers:
        x0, y0, x1, y1 = m.shape.bounds()
        sizes.append(max(x1 - x0, y1 - y0))
    return float(np.mean(sizes)) if sizes else 2.0


def _marker_area_range_mm2(layout: ChipLayout) -> Tuple[float, float]:
    areas = []
    for m in layout.markers:
        x0, y0, x1, y1 = m.shape.bounds()
        areas.append((x1 - x0) * (y1 - y0))
    if not areas:
        return 1.0, 16.0
    # Bounding-box area overestimates triangles/circles; halve the floor.
    return 0.4 * min(areas), 1.2 * max(areas)


def _classify_contour(contour: np.ndarray) -> Optional[Tuple[MarkerTag, float]]:
    perimeter = cv2.arcLength(contour, True)
    area = cv2.contourArea(contour)
    if perimeter <= 0 or area <= 0:
        return None
    approx = cv2.approxPolyDP(contour, 0.02 * perimeter, True)
    isoper = 4.0 * math.pi * area / (perimeter * perimeter)
    tag = None
    if len(approx) == 3:
        tag = MarkerTag.TRIANGLE
    elif len(approx) == 4 and cv2.isContourConvex(approx):
        pts = approx.reshape(4, 2).astype(np.float64)
        sides = np.linalg.norm(pts - np.roll(pts, -1, axis=0), axis=1)
        if sides.min() > 0 and sides.max() / sides.min() <= 1.25:
            tag = MarkerTag.SQUARE
    if tag is None and isoper >= 0.85:
        tag = MarkerTag.CIRCLE
    if tag is None:
        return None
    score = min(1.0, isoper / _IDEAL_ISOPERIMETRIC[tag])
    return tag, float(score)


def detect_fiducials(image, layout: ChipLayout,
                     config: AnalysisConfig = AnalysisConfig()) -> List[MarkerDetection]:
    """Find corner-marker candidates, best score first.

    Adaptive thresholding (window about twice the expected marker diameter)
    tolerates illumination gradients; candidates must be dark inside, sized
    plausibly for the configured scale range, and shaped like one of the
    three marker tags. An empty list is a valid result.
    """
    arr = _as_rgb_array(image, config.min_image_side)
    h, w = arr.shape[:2]
    gray = (arr.astype(np.float32) @ LUMA_WEIGHTS.astype(np.float32)).astype(np.float32)
    gray_u8 = np.clip(gray, 0, 255).astype(np.uint8)
    gray_u8 = cv2.GaussianBlur(gray_u8, (5, 5), 1.0)

    diameter_px = _marker_diameter_mm(layout) * config.nominal_px_per_mm
    area_lo_mm, area_hi_mm = _marker_area_range_mm2(layout)
    s_lo, s_hi = config.scale_bounds
    area_lo = area_lo_mm * (config.nominal_px_per_mm * s_lo) ** 2
    area_hi = area_hi_mm * (config.nominal_px_per_mm * s_hi) ** 2

    detections: List[MarkerDetection] = []
    for window_scale in (1.0, 4.0):
        block = int(2.0 * diameter_px * window_scale)
        block = max(15, min(block, (min(h, w) // 2) * 2 - 1))
        if block % 2 == 0:
            block += 1
        mask = cv2.adaptiveThreshold(gray_u8, 255, cv2.ADAPTIVE_THRESH_MEAN_C,
                                     cv2.THRESH_BINARY_INV, block, 26)
        contours, _ = cv2.findContours(mask, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
        for contour in contours:
            area = cv2.contourArea(contour)
            if not area_lo <= area <= area_hi:
                continue
            moments = cv2.moments(contour)
            if moments["m00"] <= 0:
                continue
            cx = moments["m10"] / moments["m00"]
            cy = moments["m01"] / moments["m00"]
            # Interior must be genuinely dark, not just darker than its
            # neighbourhood; this rejects the printed assay colors.
            x0, y0, bw, bh = cv2.boundingRect(contour)
            local = np.zeros((bh, bw), dtype=np.uint8)
            cv2.drawContours(local, [contour - [x0, y0]], -1, 255, cv2.FILLED)
            inside = gray[y0:y0 + bh, x0:x0 + bw][local > 0]
            if inside.size == 0 or float(np.mean(inside)) > config.marker_max_luminance * 255.0:
                continue
            classified = _classify_contour(contour)
            if classified is None:
                continue
            tag, score = classified
            detections.append(MarkerDetection(tag, (cx, cy), score, float(area)))

    # Merge duplicates across threshold windows: same spot, keep best score.
    detections.sort(key=lambda d: -d.score)
    merged: List[MarkerDetection] = []
    min_sep = max(4.0, 0.5 * diameter_px * s_lo)
    for det in detections:
        if all(math.dist(det.centroid_px, kept.centroid_px) > min_sep for kept in merged):
            merged.append(det)
    return merged


# ---------------------------------------------------------------------------
# Rectification

def _collinear(points: np.ndarray) -> bool:
    pts = np.asarray(points, dtype=np.float64)
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    return sv[-1] < 1e-3 * max(sv[0], 1e-9)


def estimate_rectification(detections: List[MarkerDetection], layout: ChipLayout,
                           config: AnalysisConfig = AnalysisConfig()) -> RectificationResult:
    """Least-squares affine from marker correspondences.

    Shape tags pin detections to layout markers; when a tag repeats, every
    consistent assignment is tried and the orientation-preserving one with
    the smallest residual wins. Raises InsufficientMarkers, Degenerate-
    Geometry (collinear points) or AmbiguousAssignment (two assignments
    within 5% residual of each other).
    """
    markers = list(layout.markers)
    by_tag: Dict[MarkerTag, List[int]] = {}
    for i, det in enumerate(detections[:12]):
        by_tag.setdefault(det.tag, []).append(i)

    def assignments_for(subset: Tuple[int, ...]):
        pools = [by_tag.get(markers[mi].marker_tag, []) for mi in subset]
        for combo in itertools.product(*pools):
            if len(set(combo)) == len(combo):
                yield combo

    candidates = []  # (size, residual, transform, pairs)
    sizes_tried = 0
    for size in (4, 3):
        for subset in itertools.combinations(range(len(markers)), size):
            for combo in assignments_for(subset):
                sizes_tried += 1
                src = np.array([markers[mi].centroid() for mi in subset])
                dst = np.array([detections[di].centroid_px for di in combo])
                if _collinear(src) or _collinear(dst):
                    continue
                transform, rms = AffineTransform.fit(src, dst)
                if transform.determinant <= 0:
                    continue  # mirrored assignment; photos preserve orientation
                pairs = {markers[mi].region_id: detections[di]
                         for mi, di in zip(subset, combo)}
                candidates.append((size, rms, transform, pairs))
        if candidates:
            break

    if not candidates:
        if sizes_tried == 0:
            raise InsufficientMarkers(
                "need at least 3 tag-matched markers, have %d detections "
                "for tags %s" % (len(detections), sorted(t.value for t in by_tag)))
        raise DegenerateGeometry("marker geometry is collinear or mirrored; "
                                 "cannot fit an affine transform")

    candidates.sort(key=lambda c: c[1])
    best = candidates[0]
    if len(candidates) > 1:
        second = candidates[1]
        close = second[1] <= best[1] * 1.05 + 1e-9
        if close and not np.allclose(second[2].matrix, best[2].matrix,
                                     rtol=0.01, atol=1e-6):
            raise AmbiguousAssignment(
                "two marker assignments fit almost equally well "
                "(residual %.3f vs %.3f px)" % (best[1], second[1]))
    return RectificationResult(transform=best[2], residual_px=best[1],
                               assignment=best[3])


# ---------------------------------------------------------------------------
# Sampling

def _shrunk_shape(shape, config: AnalysisConfig):
    if isinstance(shape, CircleShape):
        return CircleShape(shape.center, shape.radius * config.circle_sample_fraction)
    factor = math.sqrt(config.bar_sample_area_fraction)
    if isinstance(shape, RectShape):
        cx, cy = shape.centroid()
        w = shape.width * factor
        h = shape.height * factor
        return RectShape((cx - w / 2.0, cy - h / 2.0), w, h)
    if isinstance(shape, PolygonShape):
        cx, cy = shape.centroid()
        verts = tuple(((x - cx) * factor + cx, (y - cy) * factor + cy)
                      for x, y in shape.vertices)
        return PolygonShape(verts)
    raise TypeError("unknown shape %r" % (shape,))


def _membership(shape, pts_mm: np.ndarray) -> np.ndarray:
    if isinstance(shape, CircleShape):
        delta = pts_mm - np.asarray(shape.center)
        return np.sum(delta ** 2, axis=1) <= shape.radius ** 2
    if isinstance(shape, RectShape):
        x0, y0, x1, y1 = shape.bounds()
        return ((pts_mm[:, 0] >= x0) & (pts_mm[:, 0] <= x1)
                & (pts_mm[:, 1] >= y0) & (pts_mm[:, 1] <= y1))
    poly = shape.polygon()
    # Convex polygon: inside means the interior side of every edge, where
    # the interior side follows the winding orientation (shoelace sign).
    area2 = 0.0
    for i in range(len(poly)):
        a = poly[i]
        b = poly[(i + 1) % len(poly)]
        area2 += a[0] * b[1] - b[0] * a[1]
    sign = 1.0 if area2 >= 0 else -1.0
    inside = np.ones(len(pts_mm), dtype=bool)
    for i in range(len(poly)):
        a = poly[i]
        b = poly[(i + 1) % len(poly)]
        cross = ((b[0] - a[0]) * (pts_mm[:, 1] - a[1])
                 - (b[1] - a[1]) * (pts_mm[:, 0] - a[0]))
        inside &= sign * cross >= -1e-12
    return inside


def sample_color(image: np.ndarray, transform: AffineTransform, shape,
                 config: AnalysisConfig = AnalysisConfig()) -> ColorSample:
    """Mean color over the central part of a region.

    Circles sample the central half of the radius, bars the central 60% of
    the area, so rectification wobble and edge bleed stay out of the
    estimate. Averaging also recovers sub-quantization color from sensor
    dither. Raises RegionOutOfImage when the full region does not map
    inside the frame and EmptyRegion below 4 pixels.
    """
    arr = np.asarray(image)
    h, w = arr.shape[:2]
    x0, y0, x1, y1 = shape.bounds()
    corners_mm = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    corners_px = transform.apply(corners_mm)
    if (corners_px[:, 0].min() < -0.5 or corners_px[:, 1].min() < -0.5
            or corners_px[:, 0].max() > w - 0.5 or corners_px[:, 1].max() > h - 0.5):
        raise RegionOutOfImage("region maps to x [%.1f, %.1f] y [%.1f, %.1f] "
                               "outside %dx%d image"
                               % (corners_px[:, 0].min(), corners_px[:, 0].max(),
                                  corners_px[:, 1].min(), corners_px[:, 1].max(), w, h))

    inner = _shrunk_shape(shape, config)
    ix0, iy0, ix1, iy1 = inner.bounds()
    icorners_px = transform.apply(np.array([[ix0, iy0], [ix1, iy0],
                                            [ix1, iy1], [ix0, iy1]]))
    px_lo = np.floor(icorners_px.min(axis=0)).astype(int)
    px_hi = np.ceil(icorners_px.max(axis=0)).astype(int)
    xs = np.arange(max(px_lo[0], 0), min(px_hi[0] + 1, w))
    ys = np.arange(max(px_lo[1], 0), min(px_hi[1] + 1, h))
    if xs.size == 0 or ys.size == 0:
        raise EmptyRegion("region maps to zero pixels")
    grid_x, grid_y = np.meshgrid(xs, ys)
    pts_px = np.stack([grid_x.ravel(), grid_y.ravel()], axis=1).astype(np.float64)
    pts_mm = transform.inverse().apply(pts_px)
    keep = _membership(inner, pts_mm)
    if int(keep.sum()) < 4:
        raise EmptyRegion("region covers %d pixels, need at least 4" % int(keep.sum()))

    pixels = arr[pts_px[keep, 1].astype(int), pts_px[keep, 0].astype(int)]
    values = pixels.astype(np.float64) / 255.0 if arr.dtype == np.uint8 else pixels
    mean = np.mean(values, axis=0)
    std = np.std(values, axis=0)
    return ColorSample(mean=Color(float(mean[0]), float(mean[1]), float(mean[2])),
                       dispersion=(float(std[0]), float(std[1]), float(std[2])),
                       pixel_count=int(keep.sum()))


# ---------------------------------------------------------------------------
# Validity

def _luminance(color: Color) -> float:
    return float(color.as_array() @ LUMA_WEIGHTS)


def assess_validity(circle_samples: Dict[ChemicalKind, Optional[ColorSample]],
                    bar_samples: Dict[ChemicalKind, List[Optional[ColorSample]]],
                    scales: Dict[ChemicalKind, ReferenceScale],
                    config: AnalysisConfig = AnalysisConfig()) -> ValidityAssessment:
    """Decide which chemicals actually collected guttation.

    A circle is unreacted (dry) when its color sits within epsilon_dry of
    the dry-substrate color, after scaling that reference by the local
    illumination gain. The gain is the mean luminance ratio over the four
    reference bars; their centroid coincides with the circle centre, so a
    linear illumination ramp cancels exactly. Chemicals with missing or
    high-dispersion bars are unusable; when at least half the panel's bars
    fail the whole reading is Unreadable.
    """
    flags: Dict[ChemicalKind, bool] = {}
    notes: List[str] = []
    dry: Dict[ChemicalKind, bool] = {}
    bars_ok: Dict[ChemicalKind, bool] = {}

    for chem in CHEMICAL_ORDER:
        bars = bar_samples.get(chem, [])
        ok = len(bars) == 4 and all(b is not None for b in bars)
        if ok:
            worst = max(b.max_dispersion for b in bars)
            if worst > config.max_bar_dispersion:
                ok = False
                notes.append("%s: reference bars washed out (dispersion %.3f)"
                             % (chem.value, worst))
        else:
            notes.append("%s: reference bars missing" % chem.value)
        bars_ok[chem] = ok

        circle = circle_samples.get(chem)
        if not ok or circle is None:
            if circle is None:
                notes.append("%s: test circle not sampled" % chem.value)
            flags[chem] = False
            dry[chem] = False
            continue

        ratios = []
        for knot, bar in zip(scales[chem].knots, bars):
            ref_lum = _luminance(knot.color)
            if bar is not None and ref_lum > 1e-6:
                ratios.append(_luminance(bar.mean) / ref_lum)
        gain = min(2.0, max(0.5, float(np.mean(ratios)))) if ratios else 1.0
        dry_ref = config.dry_color.as_array() * gain
        distance = float(np.linalg.norm(circle.mean.as_array() - dry_ref))
        is_dry = distance < config.epsilon_dry
        dry[chem] = is_dry
        if is_dry:
            notes.append("%s: no guttation collected (dry circle)" % chem.value)
        flags[chem] = not is_dry

    failed_bars = sum(1 for ok in bars_ok.values() if not ok)
    if failed_bars >= 3:
        return ValidityAssessment(
            status=ReadingStatus.UNREADABLE,
            per_chemical={c: False for c in CHEMICAL_ORDER},
            notes=tuple(notes + ["reference bars unreadable for %d of 6 chemicals"
                                 % failed_bars]))

    if all(flags.get(c, False) for c in CHEMICAL_ORDER):
        status = ReadingStatus.REACTED
    elif not any(flags.values()):
        readable = [c for c in CHEMICAL_ORDER if bars_ok[c]]
        if readable and all(dry[c] for c in readable):
            status = ReadingStatus.UNREACTED
        else:
            status = ReadingStatus.UNREADABLE
            flags = {c: False for c in CHEMICAL_ORDER}
    else:
        status = ReadingStatus.PARTIAL
    return ValidityAssessment(status=status, per_chemical=flags, notes=tuple(notes))


# ---------------------------------------------------------------------------
# Full pipeline

def analyze(image, layout: ChipLayout, scales,
            config: AnalysisConfig = AnalysisConfig()) -> ChipReading:
    """Run the whole pipeline on one photo and return a ChipReading.

    Identical input bytes produce an identical reading. Failures raise
    PipelineError naming the stage that gave up.
    """
    scale_map = scales_by_chemical(scales) if not isinstance(scales, dict) else scales

    try:
        arr = _as_rgb_array(image, config.min_image_side)
    except ImageDecodeError as exc:
        raise PipelineError("decode", exc)

    try:
        detections = detect_fiducials(arr, layout, config)
        if len(detections) < 3:
            raise InsufficientMarkers("found %d marker candidates, need 3"
                                      % len(detections))
    except (ImageDecodeError, InsufficientMarkers) as exc:
        raise PipelineError("fiducials", exc)

    try:
        rectification = estimate_rectification(detections, layout, config)
        det = abs(rectification.transform.determinant)
        nominal = config.nominal_px_per_mm ** 2
        lo = (config.scale_bounds[0] ** 2) * nominal
        hi = (config.scale_bounds[1] ** 2) * nominal
        if not lo <= det <= hi:
            raise DegenerateGeometry(
                "transform determinant %.1f px^2/mm^2 outside [%.1f, %.1f]"
                % (det, lo, hi))
    except (InsufficientMarkers, AmbiguousAssignment, DegenerateGeometry) as exc:
        raise PipelineError("rectification", exc)

    transform = rectification.transform
    sampling_notes: List[str] = []
    circle_samples: Dict[ChemicalKind, Optional[ColorSample]] = {}
    bar_samples: Dict[ChemicalKind, List[Optional[ColorSample]]] = {}
    for chem in CHEMICAL_ORDER:
        circle_region = layout.circle_for(chem)
        try:
            circle_samples[chem] = sample_color(arr, transform, circle_region.shape, config)
        except (RegionOutOfImage, EmptyRegion) as exc:
            circle_samples[chem] = None
            sampling_notes.append("%s: %s" % (circle_region.region_id, exc))
        row: List[Optional[ColorSample]] = []
        for bar in layout.bars_for(chem):
            try:
                row.append(sample_color(arr, transform, bar.shape, config))
            except (RegionOutOfImage, EmptyRegion) as exc:
                row.append(None)
                sampling_notes.append("%s: %s" % (bar.region_id, exc))
        bar_samples[chem] = row

    validity = assess_validity(circle_samples, bar_samples, scale_map, config)
    if sampling_notes:
        validity = ValidityAssessment(validity.status, validity.per_chemical,
                                      validity.notes + tuple(sampling_notes))

    measurements: Dict[ChemicalKind, Measurement] = {}
    for chem in CHEMICAL_ORDER:
        if not validity.per_chemical.get(chem, False):
            continue
        bars = bar_samples[chem]
        circle = circle_samples[chem]
        try:
            measurements[chem] = quantify(
                scale_map[chem],
                np.array([b.mean.as_tuple() for b in bars]),
                circle.mean,
                family=config.curve_family)
        except DegenerateColors as exc:
            flags = dict(validity.per_chemical)
            flags[chem] = False
            validity = ValidityAssessment(
                validity.status, flags,
                validity.notes + ("%s: %s" % (chem.value, exc),))

    diagnostics = {
        "marker_count": len(detections),
        "markers": [d.to_dict() for d in detections[:8]],
        "scale_px_per_mm": math.sqrt(abs(transform.determinant)),
        "assignment": {rid: d.tag.value
                       for rid, d in sorted(rectification.assignment.items())},
        "samples": {
            chem.value: {
                "circle": circle_samples[chem].to_dict() if circle_samples[chem] else None,
                "bars": [b.to_dict() if b else None for b in bar_samples[chem]],
            }
            for chem in CHEMICAL_ORDER
        },
    }
    return ChipReading(measurements=measurements, validity=validity,
                       rectification_residual_px=rectification.residual_px,
                       diagnostics=diagnostics)
