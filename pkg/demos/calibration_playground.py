"""Poke at one calibration curve: where colors land, how confidence decays.

The nitrate scale has knots at 0, 1, 5, 10 ppm. A cubic through the four
knot colors gives a color for every intermediate concentration; reading a
chip runs that in reverse, projecting the sampled color back onto the
curve.
"""

import numpy as np

from sapsense import (ChemicalKind, default_scales, fit_curve, project,
                      quantify, t_for_concentration)
from sapsense.chip import scales_by_chemical

scale = scales_by_chemical(default_scales())[ChemicalKind.NITRATE]
reference = np.array([k.color.as_tuple() for k in scale.knots])
curve = fit_curve(reference)

print("nitrate knots:", scale.values())

# forward: concentration -> expected strip color
for ppm in (0.0, 0.5, 2.5, 7.0, 10.0):
    t = t_for_concentration(scale, ppm)
    r, g, b = curve.point_at(t)
    print("  %5.1f ppm -> t=%.3f  rgb(%.3f, %.3f, %.3f)" % (ppm, t, r, g, b))

# reverse: a color that sits exactly on the curve projects back exactly
probe = curve.point_at(0.37)
t_star, dist = project(curve, probe)
print("\non-curve probe: t*=%.4f  distance=%.2e" % (t_star, dist))

# push the probe off the curve and watch confidence fall off
print("\n%8s %10s %10s %12s" % ("offset", "ppm", "distance", "confidence"))
rng = np.random.default_rng(0)
direction = rng.normal(size=3)
direction /= np.linalg.norm(direction)
for offset in (0.0, 0.01, 0.03, 0.06, 0.12):
    color = np.clip(probe + offset * direction, 0.0, 1.0)
    m = quantify(scale, reference, color)
    print("%8.2f %10.3f %10.4f %12.3f"
          % (offset, m.value, m.curve_distance, m.confidence))

# colors past the last knot flag themselves instead of inventing 11 ppm
beyond = np.clip(2 * reference[3] - reference[2], 0.0, 1.0)
m = quantify(scale, reference, beyond)
print("\npast the dark end: value=%.2f extrapolated=%s" % (m.value, m.extrapolated))
