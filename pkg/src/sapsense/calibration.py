"""Concentration quantification against a four-knot color scale.

The four reference bars for a chemical give four RGB anchors. A smooth curve
through them (one cubic per channel over the shared parameter t in [0, 1],
knots at t = 0, 1/3, 2/3, 1) models how the assay color moves with
concentration. Quantifying a reactant color means finding the closest point
on that curve and mapping its parameter back to concentration through the
scale's knot values, piecewise linearly. Ordinal scales (acephate) snap the
parameter to the nearest knot level instead.

The curve is fit to the colors *sampled from the photo*, not to the nominal
printed colors, so lighting shifts common to the whole chip cancel out.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .chip import ChemicalKind, Color, ReferenceScale, MIN_KNOT_COLOR_DISTANCE
from .errors import DegenerateColors, OutOfRange

KNOT_TS = np.array([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])

# Distance at which confidence decays to 1/e, and the endpoint-mismatch
# distance above which a clamped projection counts as extrapolated.
CONFIDENCE_D0 = 0.05
ENDPOINT_EPSILON = 0.02

PROJECTION_SAMPLES = 1024
PROJECTION_TOL = 1e-9

ColorsLike = Union[Sequence[Color], np.ndarray]


def _colors_to_array(colors: ColorsLike) -> np.ndarray:
    if isinstance(colors, np.ndarray):
        arr = np.asarray(colors, dtype=np.float64)
    else:
        arr = np.array([c.as_tuple() if isinstance(c, Color) else tuple(c)
                        for c in colors], dtype=np.float64)
    if arr.shape != (4, 3):
        raise ValueError("expected 4 RGB colors, got array of shape %s" % (arr.shape,))
    return arr


@dataclass(frozen=True)
class CalibrationCurve:
    """Per-channel polynomial in t over [0, 1] through the four knot colors."""

    coeffs: np.ndarray       # (3, deg+1) ascending powers, one row per channel
    knot_colors: np.ndarray  # (4, 3) the colors the fit was built from

    def point_at(self, t) -> np.ndarray:
        """Curve position for scalar t -> (3,) or vector t -> (n, 3)."""
        t_arr = np.asarray(t, dtype=np.float64)
        powers = t_arr[..., None] ** np.arange(self.coeffs.shape[1])
        return powers @ self.coeffs.T

    def distance_at(self, t, color: np.ndarray) -> float:
        return float(np.linalg.norm(self.point_at(t) - color))


def fit_curve(reference_colors: ColorsLike, family: str = "cubic") -> CalibrationCurve:
    """Fit the calibration curve through four reference colors.

    family "cubic" interpolates the knots exactly (the default); "quadratic"
    does a least-squares degree-2 fit, which tolerates one noisy knot at the
    cost of no longer passing through the anchors exactly.
    """
    anchors = _colors_to_array(reference_colors)
    for i in range(4):
        for j in range(i + 1, 4):
            d = float(np.linalg.norm(anchors[i] - anchors[j]))
            if d < MIN_KNOT_COLOR_DISTANCE:
                raise DegenerateColors(
                    "reference colors %d and %d are %.4f apart in RGB, below the "
                    "%.2f minimum; cannot calibrate" % (i, j, d, MIN_KNOT_COLOR_DISTANCE))
    if family == "cubic":
        vander = KNOT_TS[:, None] ** np.arange(4)
        coeffs = np.linalg.solve(vander, anchors).T
    elif family == "quadratic":
        vander = KNOT_TS[:, None] ** np.arange(3)
        coeffs, *_ = np.linalg.lstsq(vander, anchors, rcond=None)
        coeffs = coeffs.T
    else:
        raise ValueError("unknown curve family %r" % family)
    return CalibrationCurve(coeffs=coeffs, knot_colors=anchors)


def _golden_section(fn, lo: float, hi: float, tol: float) -> float:
    """Golden-section minimum of fn on [lo, hi] to bracket width tol."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return (a + b) / 2.0


def project(curve: CalibrationCurve, color: Union[Color, np.ndarray],
            samples: int = PROJECTION_SAMPLES,
            tol: float = PROJECTION_TOL) -> Tuple[float, float]:
    """Closest point on the curve to a color.

    Returns (t_star, distance). Dense sampling locates the global basin and
    golden-section refinement polishes it; distance ties resolve toward the
    smaller t. t_star is clamped to [0, 1] and snapped exactly to an endpoint
    when the minimum sits on the boundary.
    """
    target = color.as_array() if isinstance(color, Color) else np.asarray(color, float)
    ts = np.linspace(0.0, 1.0, max(int(samples), 2))
    d2 = np.sum((curve.point_at(ts) - target) ** 2, axis=1)
    best = int(np.argmin(d2))  # first index wins ties, i.e. the smaller t

    lo = ts[max(best - 1, 0)]
    hi = ts[min(best + 1, len(ts) - 1)]

    def objective(t):
        delta = curve.point_at(t) - target
        return float(delta @ delta)

    t_star = _golden_section(objective, float(lo), float(hi), tol)
    # Refinement is local; never let it come out worse than the grid point.
    if objective(t_star) > d2[best]:
        t_star = float(ts[best])
    t_star = min(1.0, max(0.0, t_star))
    if t_star < 1e-7:
        t_star = 0.0
    elif t_star > 1.0 - 1e-7:
        t_star = 1.0
    return t_star, curve.distance_at(t_star, target)


def concentration_at(scale: ReferenceScale, t: float) -> float:
    """Map curve parameter t in [0, 1] to a concentration on the scale.

    Continuous scales interpolate linearly between knot values; ordinal
    scales return the nearest level, ties resolving toward the lower one.
    """
    t = min(1.0, max(0.0, float(t)))
    if scale.is_ordinal:
        return float(min(3, max(0, math.ceil(3.0 * t - 0.5))))
    values = scale.values()
    seg = min(int(t * 3.0), 2)
    local = t * 3.0 - seg
    return values[seg] + local * (values[seg + 1] - values[seg])


def t_for_concentration(scale: ReferenceScale, value: float) -> float:
    """Inverse of concentration_at for values inside the scale's span."""
    values = scale.values()
    if not values[0] <= value <= values[-1]:
        raise OutOfRange("value %g outside scale %s span [%g, %g]"
                         % (value, scale.chemical.value, values[0], values[-1]))
    for seg in range(3):
        lo, hi = values[seg], values[seg + 1]
        if value <= hi or seg == 2:
            return (seg + (value - lo) / (hi - lo)) / 3.0
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class Measurement:
    """One quantified chemical reading."""

    chemical: ChemicalKind
    value: float
    t_star: float
    curve_distance: float
    extrapolated: bool
    confidence: float

    def to_dict(self) -> dict:
        return {
            "chemical": self.chemical.value,
            "value": self.value,
            "t_star": self.t_star,
            "curve_distance": self.curve_distance,
            "extrapolated": self.extrapolated,
            "confidence": self.confidence,
        }


def quantify(scale: ReferenceScale, reference_colors: ColorsLike,
             reactant_color: Union[Color, np.ndarray],
             family: str = "cubic",
             d0: float = CONFIDENCE_D0,
             endpoint_epsilon: float = ENDPOINT_EPSILON) -> Measurement:
    """Quantify a reactant color against sampled reference colors.

    The measurement is flagged extrapolated when the projection clamps to an
    endpoint of the curve while the color clearly sits beyond it (endpoint
    distance above endpoint_epsilon). Confidence decays exponentially with
    distance from the curve, exp(-distance / d0).
    """
    curve = fit_curve(reference_colors, family=family)
    t_star, distance = project(curve, reactant_color)
    value = concentration_at(scale, t_star)
    at_end = t_star in (0.0, 1.0)
    extrapolated = bool(at_end and distance > endpoint_epsilon)
    confidence = math.exp(-distance / d0)
    return Measurement(
        chemical=scale.chemical,
        value=value,
        t_star=t_star,
        curve_distance=distance,
        extrapolated=extrapolated,
        confidence=confidence,
    )
