"""Synthetic chip photographs with known ground truth.

This is the oracle the test suite leans on: it renders a chip exactly as
the layout and scales describe it, applies a known affine warp, a bounded
multiplicative illumination ramp, and seeded Gaussian noise, and records
the truth alongside. If analyze() recovers the truth, the pipeline works;
no plants, reagents or cameras required.

Shapes are rasterized at 4x supersampling with 4 fractional bits of vertex
precision, then box-filtered down, so anti-aliased edges land marker
centroids well inside the 2 px tolerance the detector is held to.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

import cv2
import numpy as np
from PIL import Image
from scipy.stats import qmc

from .calibration import fit_curve, t_for_concentration
from .chip import (
    CHEMICAL_ORDER,
    ChemicalKind,
    ChipLayout,
    Color,
    ReferenceScale,
    default_layout,
    default_scales,
    scales_by_chemical,
)
from .errors import OutOfRange
from .imaging import AffineTransform

GENERATOR_VERSION = "0.1.0"

MAX_RAMP_AMPLITUDE = 0.15  # multiplicative ramp stays within +-15%
MIN_RESOLUTION_PX_PER_MM = 5.0


@dataclass(frozen=True)
class WarpParams:
    rotation_deg: float = 0.0
    scale: float = 1.0
    shear: float = 0.0
    translation_px: Tuple[float, float] = (0.0, 0.0)

    def to_dict(self) -> dict:
        return {"rotation_deg": self.rotation_deg, "scale": self.scale,
                "shear": self.shear,
                "translation_px": [self.translation_px[0], self.translation_px[1]]}

    @classmethod
    def from_dict(cls, doc: dict) -> "WarpParams":
        return cls(rotation_deg=float(doc.get("rotation_deg", 0.0)),
                   scale=float(doc.get("scale", 1.0)),
                   shear=float(doc.get("shear", 0.0)),
                   translation_px=tuple(float(v) for v in doc.get("translation_px", (0.0, 0.0))))


@dataclass(frozen=True)
class IlluminationRamp:
    """Linear multiplicative brightness ramp across the frame.

    The gain is 1 + amplitude * (d . (p - center)) / half_diagonal with d
    the unit vector at direction_deg, so the field spans exactly +-amplitude
    at the two corners the ramp is aligned with and less elsewhere.
    """

    amplitude: float = 0.0
    direction_deg: float = 0.0

    def to_dict(self) -> dict:
        return {"amplitude": self.amplitude, "direction_deg": self.direction_deg}

    @classmethod
    def from_dict(cls, doc: dict) -> "IlluminationRamp":
        return cls(amplitude=float(doc.get("amplitude", 0.0)),
                   direction_deg=float(doc.get("direction_deg", 0.0)))

    def field(self, width: int, height: int) -> np.ndarray:
        cx = (width - 1) / 2.0
        cy = (height - 1) / 2.0
        half_diag = math.hypot(cx, cy)
        theta = math.radians(self.direction_deg)
        xs = np.arange(width) - cx
        ys = np.arange(height) - cy
        proj = (np.cos(theta) * xs[None, :] + np.sin(theta) * ys[:, None]) / half_diag
        return 1.0 + self.amplitude * proj


@dataclass(frozen=True)
class TruthCase:
    """Known-truth description of one rendered chip photo.

    A concentration of None means that circle collected no guttation and is
    rendered as bare substrate.
    """

    concentrations: Mapping[ChemicalKind, Optional[float]]
    warp: WarpParams = WarpParams()
    noise_sigma: float = 0.0
    ramp: IlluminationRamp = IlluminationRamp()
    resolution_px_per_mm: float = 20.0
    seed: int = 0

    def validate(self, scales: Dict[ChemicalKind, ReferenceScale]) -> None:
        if self.resolution_px_per_mm < MIN_RESOLUTION_PX_PER_MM:
            raise OutOfRange("resolution %.1f px/mm below minimum %.1f"
                             % (self.resolution_px_per_mm, MIN_RESOLUTION_PX_PER_MM))
        if not 0.0 <= self.noise_sigma <= 1.0:
            raise OutOfRange("noise sigma %.3f outside [0, 1]" % self.noise_sigma)
        if abs(self.ramp.amplitude) > MAX_RAMP_AMPLITUDE:
            raise OutOfRange("ramp amplitude %.3f beyond +-%.2f"
                             % (self.ramp.amplitude, MAX_RAMP_AMPLITUDE))
        for chem, value in self.concentrations.items():
            if value is None:
                continue
            values = scales[chem].values()
            if not values[0] <= value <= values[-1]:
                raise OutOfRange("%s value %s outside [%s, %s]"
                                 % (chem.value, value, values[0], values[-1]))

    @property
    def all_unreacted(self) -> bool:
        return all(v is None for v in self.concentrations.values())

    def to_dict(self) -> dict:
        return {
            "concentrations": {c.value: self.concentrations.get(c)
                               for c in CHEMICAL_ORDER},
            "warp": self.warp.to_dict(),
            "noise_sigma": self.noise_sigma,
            "ramp": self.ramp.to_dict(),
            "resolution_px_per_mm": self.resolution_px_per_mm,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TruthCase":
        conc = {ChemicalKind(name): (None if value is None else float(value))
                for name, value in doc.get("concentrations", {}).items()}
        return cls(concentrations=conc,
                   warp=WarpParams.from_dict(doc.get("warp", {})),
                   noise_sigma=float(doc.get("noise_sigma", 0.0)),
                   ramp=IlluminationRamp.from_dict(doc.get("ramp", {})),
                   resolution_px_per_mm=float(doc.get("resolution_px_per_mm", 20.0)),
                   seed=int(doc.get("seed", 0)))


@dataclass(frozen=True)
class RenderStyle:
    """Colors and rendering knobs that are not part of a case's truth."""

    margin_mm: float = 9.0
    supersample: int = 4
    background: Color = Color(0.45, 0.55, 0.42)  # leaf-ish, mid luminance
    substrate: Color = Color(0.92, 0.92, 0.88)   # matches the dry reference
    marker_color: Color = Color(0.08, 0.08, 0.10)
    blur_sigma_px: float = 0.0
    curve_family: str = "cubic"


def color_for_concentration(scale: ReferenceScale, value: float,
                            family: str = "cubic") -> Color:
    """Exact inverse of quantification for on-curve colors.

    Maps the value back to curve position t through the piecewise-linear
    knot map, then evaluates the fitted curve there. Knot values reproduce
    knot colors exactly. Raises OutOfRange outside the scale's span.
    """
    t = t_for_concentration(scale, value)
    point = fit_curve(scale.colors_array(), family=family).point_at(t)
    return Color(float(point[0]), float(point[1]), float(point[2]))


def canvas_size(layout: ChipLayout, truth: TruthCase,
                style: RenderStyle = RenderStyle()) -> Tuple[int, int]:
    x0, y0, x1, y1 = layout.bounds()
    res = truth.resolution_px_per_mm
    width = int(round((x1 - x0 + 2.0 * style.margin_mm) * res))
    height = int(round((y1 - y0 + 2.0 * style.margin_mm) * res))
    return width, height


def truth_transform(layout: ChipLayout, truth: TruthCase,
                    style: RenderStyle = RenderStyle()) -> AffineTransform:
    """The exact mm -> px map the renderer uses; rotation about chip centre."""
    x0, y0, x1, y1 = layout.bounds()
    center_mm = np.array([(x0 + x1) / 2.0, (y0 + y1) / 2.0])
    width, height = canvas_size(layout, truth, style)
    center_px = np.array([(width - 1) / 2.0, (height - 1) / 2.0])

    theta = math.radians(truth.warp.rotation_deg)
    rot = np.array([[math.cos(theta), -math.sin(theta)],
                    [math.sin(theta), math.cos(theta)]])
    shear = np.array([[1.0, truth.warp.shear], [0.0, 1.0]])
    linear = truth.warp.scale * truth.resolution_px_per_mm * (rot @ shear)
    offset = center_px + np.asarray(truth.warp.translation_px) - linear @ center_mm
    return AffineTransform(np.hstack([linear, offset[:, None]]))


_FILL_SHIFT = 4  # fractional bits handed to fillPoly

# 8x8 ordered-dither thresholds; floor(255*x + threshold) is unbiased, so
# region averages carry sub-quantization color the way sensor noise would.
_BAYER8 = np.array([
    [0, 32, 8, 40, 2, 34, 10, 42],
    [48, 16, 56, 24, 50, 18, 58, 26],
    [12, 44, 4, 36, 14, 46, 6, 38],
    [60, 28, 52, 20, 62, 30, 54, 22],
    [3, 35, 11, 43, 1, 33, 9, 41],
    [51, 19, 59, 27, 49, 17, 57, 25],
    [15, 47, 7, 39, 13, 45, 5, 37],
    [63, 31, 55, 23, 61, 29, 53, 21],
], dtype=np.float64)


def _fill(canvas: np.ndarray, pts_px: np.ndarray, color: Color) -> None:
    fixed = np.round(pts_px * (1 << _FILL_SHIFT)).astype(np.int32)
    cv2.fillPoly(canvas, [fixed], tuple(float(v) for v in color.as_tuple()),
                 lineType=cv2.LINE_8, shift=_FILL_SHIFT)


def _quantize_dithered(img: np.ndarray) -> np.ndarray:
    height, width = img.shape[:2]
    thresholds = (_BAYER8 + 0.5) / 64.0
    tiled = np.tile(thresholds, (-(-height // 8), -(-width // 8)))[:height, :width]
    return np.clip(np.floor(img * 255.0 + tiled[:, :, None]), 0.0, 255.0).astype(np.uint8)


def render_chip(layout: ChipLayout, scales, truth: TruthCase,
                style: RenderStyle = RenderStyle()) -> np.ndarray:
    """Render one chip photo; returns an (H, W, 3) uint8 RGB array.

    Deterministic for identical inputs: noise comes from a generator seeded
    with the case seed and everything else is pure arithmetic.
    """
    scale_map = scales_by_chemical(scales) if not isinstance(scales, dict) else scales
    width, height = canvas_size(layout, truth, style)
    transform = truth_transform(layout, truth, style)
    ss = style.supersample
    # Pixel p of the output is the box average of supersampled pixels
    # ss*p .. ss*p+ss-1, so mm -> supersample coords is ss*T(p) + (ss-1)/2.
    t_ss = AffineTransform(np.hstack([ss * transform.linear,
                                      (ss * transform.offset + (ss - 1) / 2.0)[:, None]]))

    canvas = np.empty((height * ss, width * ss, 3), dtype=np.float32)
    canvas[:] = style.background.as_tuple()

    x0, y0, x1, y1 = layout.bounds()
    chip_poly = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)
    _fill(canvas, t_ss.apply(chip_poly), style.substrate)

    for marker in layout.markers:
        _fill(canvas, t_ss.apply(marker.shape.polygon(segments=128)), style.marker_color)
    for bar in layout.reference_bars:
        knot = scale_map[bar.chemical].knots[bar.knot_index]
        _fill(canvas, t_ss.apply(bar.shape.polygon()), knot.color)
    for circle in layout.test_circles:
        value = truth.concentrations.get(circle.chemical)
        if value is None:
            fill_color = style.substrate
        else:
            fill_color = color_for_concentration(scale_map[circle.chemical], value,
                                                 family=style.curve_family)
        _fill(canvas, t_ss.apply(circle.shape.polygon(segments=128)), fill_color)

    if ss > 1:
        canvas = cv2.resize(canvas, (width, height), interpolation=cv2.INTER_AREA)
    img = canvas.astype(np.float64)

    if truth.ramp.amplitude != 0.0:
        img *= truth.ramp.field(width, height)[:, :, None]
    if style.blur_sigma_px > 0.0:
        img = cv2.GaussianBlur(img, (0, 0), style.blur_sigma_px)
    if truth.noise_sigma > 0.0:
        rng = np.random.default_rng(truth.seed)
        img = img + rng.normal(0.0, truth.noise_sigma, img.shape)

    return _quantize_dithered(np.clip(img, 0.0, 1.0))


def save_png(image: np.ndarray, path: Union[str, Path]) -> None:
    Image.fromarray(image, mode="RGB").save(str(path), format="PNG")


# ---------------------------------------------------------------------------
# Corpus generation

@dataclass(frozen=True)
class CorpusSpec:
    """Ranges a corpus samples over; Latin hypercube fills the space evenly."""

    count: int = 100
    seed: int = 7
    rotation_deg: Tuple[float, float] = (-15.0, 15.0)
    scale: Tuple[float, float] = (0.8, 1.2)
    shear: Tuple[float, float] = (-0.05, 0.05)
    translation_px: Tuple[float, float] = (-20.0, 20.0)
    noise_sigma: Tuple[float, float] = (0.0, 0.012)
    ramp_amplitude: Tuple[float, float] = (0.0, 0.15)
    unreacted_fraction: float = 0.0
    resolution_px_per_mm: float = 20.0
    style: RenderStyle = field(default_factory=RenderStyle)

    @classmethod
    def noiseless(cls, count: int = 100, seed: int = 7) -> "CorpusSpec":
        zero = (0.0, 0.0)
        return cls(count=count, seed=seed, rotation_deg=zero, scale=(1.0, 1.0),
                   shear=zero, translation_px=zero, noise_sigma=zero,
                   ramp_amplitude=zero)

    @classmethod
    def perturbed(cls, count: int = 100, seed: int = 7) -> "CorpusSpec":
        return cls(count=count, seed=seed, noise_sigma=(0.012, 0.012))

    @classmethod
    def unreacted(cls, count: int = 50, seed: int = 7) -> "CorpusSpec":
        return cls(count=count, seed=seed, noise_sigma=(0.012, 0.012),
                   unreacted_fraction=1.0)

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "seed": self.seed,
            "rotation_deg": list(self.rotation_deg),
            "scale": list(self.scale),
            "shear": list(self.shear),
            "translation_px": list(self.translation_px),
            "noise_sigma": list(self.noise_sigma),
            "ramp_amplitude": list(self.ramp_amplitude),
            "unreacted_fraction": self.unreacted_fraction,
            "resolution_px_per_mm": self.resolution_px_per_mm,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CorpusSpec":
        def pair(name, default):
            lo, hi = doc.get(name, default)
            return (float(lo), float(hi))
        return cls(count=int(doc.get("count", 100)),
                   seed=int(doc.get("seed", 7)),
                   rotation_deg=pair("rotation_deg", (-15.0, 15.0)),
                   scale=pair("scale", (0.8, 1.2)),
                   shear=pair("shear", (-0.05, 0.05)),
                   translation_px=pair("translation_px", (-20.0, 20.0)),
                   noise_sigma=pair("noise_sigma", (0.0, 0.012)),
                   ramp_amplitude=pair("ramp_amplitude", (0.0, 0.15)),
                   unreacted_fraction=float(doc.get("unreacted_fraction", 0.0)),
                   resolution_px_per_mm=float(doc.get("resolution_px_per_mm", 20.0)))


@dataclass
class CorpusCase:
    image: str  # path relative to the manifest
    truth: TruthCase
    transform: AffineTransform

    def to_dict(self) -> dict:
        return {"image": self.image, "truth": self.truth.to_dict(),
                "transform": self.transform.matrix.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "CorpusCase":
        return cls(image=doc["image"], truth=TruthCase.from_dict(doc["truth"]),
                   transform=AffineTransform(np.array(doc["transform"])))


@dataclass
class CorpusManifest:
    generator_version: str
    seed: int
    spec: Optional[CorpusSpec]
    cases: List[CorpusCase]
    root: Optional[Path] = None  # set on load/generate, never serialized

    def __len__(self) -> int:
        return len(self.cases)

    def image_path(self, case: CorpusCase) -> Path:
        base = self.root if self.root is not None else Path(".")
        return base / case.image

    def to_dict(self) -> dict:
        return {
            "generator_version": self.generator_version,
            "seed": self.seed,
            "count": len(self.cases),
            "spec": self.spec.to_dict() if self.spec else None,
            "cases": [case.to_dict() for case in self.cases],
        }

    def to_json(self) -> str:
        # sort_keys plus no timestamps keep regeneration byte-identical
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, doc: dict) -> "CorpusManifest":
        spec_doc = doc.get("spec")
        return cls(generator_version=doc.get("generator_version", "unknown"),
                   seed=int(doc.get("seed", 0)),
                   spec=CorpusSpec.from_dict(spec_doc) if spec_doc else None,
                   cases=[CorpusCase.from_dict(c) for c in doc.get("cases", [])])

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CorpusManifest":
        path = Path(path)
        manifest = cls.from_dict(json.loads(path.read_text()))
        manifest.root = path.parent
        return manifest


def _case_seed(corpus_seed: int, index: int) -> int:
    return (corpus_seed * 1_000_003 + index) % 2 ** 63


def build_cases(spec: CorpusSpec, layout: Optional[ChipLayout] = None,
                scales=None) -> List[TruthCase]:
    """Sample truth cases from a CorpusSpec's ranges without rendering anything.

    One Latin-hypercube draw covers the eight nuisance dimensions and the
    six concentrations, so even small corpora spread over the whole space.
    """
    if spec.count < 1:
        raise OutOfRange("corpus count must be >= 1, got %d" % spec.count)
    scale_map = (scales_by_chemical(default_scales()) if scales is None
                 else (scales if isinstance(scales, dict) else scales_by_chemical(scales)))

    sampler = qmc.LatinHypercube(d=8 + len(CHEMICAL_ORDER), seed=spec.seed)
    unit = sampler.random(spec.count)

    def span(u, bounds):
        lo, hi = bounds
        return lo + float(u) * (hi - lo)

    dry_count = int(round(spec.unreacted_fraction * spec.count))
    cases: List[TruthCase] = []
    for i in range(spec.count):
        row = unit[i]
        warp = WarpParams(rotation_deg=span(row[0], spec.rotation_deg),
                          scale=span(row[1], spec.scale),
                          shear=span(row[2], spec.shear),
                          translation_px=(span(row[3], spec.translation_px),
                                          span(row[4], spec.translation_px)))
        ramp = IlluminationRamp(amplitude=span(row[6], spec.ramp_amplitude),
                                direction_deg=span(row[7], (0.0, 360.0)))
        concentrations: Dict[ChemicalKind, Optional[float]] = {}
        for j, chem in enumerate(CHEMICAL_ORDER):
            if i < dry_count:
                concentrations[chem] = None
                continue
            u = float(row[8 + j])
            scale = scale_map[chem]
            if scale.is_ordinal:
                concentrations[chem] = float(min(3, int(u * 4)))
            else:
                values = scale.values()
                concentrations[chem] = values[0] + u * (values[-1] - values[0])
        case = TruthCase(concentrations=concentrations, warp=warp,
                         noise_sigma=span(row[5], spec.noise_sigma), ramp=ramp,
                         resolution_px_per_mm=spec.resolution_px_per_mm,
                         seed=_case_seed(spec.seed, i))
        case.validate(scale_map)
        cases.append(case)
    return cases


def generate_corpus(spec: CorpusSpec, out_dir: Union[str, Path],
                    layout: Optional[ChipLayout] = None,
                    scales=None) -> CorpusManifest:
    """Render a corpus into out_dir and write manifest.json beside the PNGs.

    Rerunning with the same spec reproduces every byte, images and manifest
    alike.
    """
    layout = layout if layout is not None else default_layout()
    scale_map = (scales_by_chemical(default_scales()) if scales is None
                 else (scales if isinstance(scales, dict) else scales_by_chemical(scales)))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    width = max(3, len(str(spec.count - 1)))
    cases: List[CorpusCase] = []
    for i, truth in enumerate(build_cases(spec, layout, scale_map)):
        name = "case_%0*d.png" % (width, i)
        image = render_chip(layout, scale_map, truth, spec.style)
        save_png(image, out / name)
        cases.append(CorpusCase(image=name, truth=truth,
                                transform=truth_transform(layout, truth, spec.style)))

    manifest = CorpusManifest(generator_version=GENERATOR_VERSION, seed=spec.seed,
                              spec=spec, cases=cases, root=out)
    manifest.save(out / "manifest.json")
    return manifest
