"""Render a chip with known chemistry, photograph-warp it, read it back."""

import numpy as np

from sapsense import (ChemicalKind, TruthCase, analyze, default_layout,
                      default_scales, render_chip, summarize)
from sapsense.chip import scales_by_chemical
from sapsense.synth import WarpParams

layout = default_layout()
scales = scales_by_chemical(default_scales())

truth = TruthCase(
    concentrations={
        ChemicalKind.ACEPHATE: 0.0,
        ChemicalKind.LEAD: 12.0,
        ChemicalKind.NITRATE: 7.5,
        ChemicalKind.NITRITE: 0.3,
        ChemicalKind.PH: 6.4,
        ChemicalKind.HARDNESS: 190.0,
    },
    warp=WarpParams(rotation_deg=9.0, scale=1.1, shear=0.02,
                    translation_px=(12.0, -6.0)),
    noise_sigma=0.01,
    seed=4,
)

image = render_chip(layout, scales, truth)
print("rendered %dx%d px" % (image.shape[1], image.shape[0]))

reading = analyze(image, layout, scales)
print("status:", reading.status.value)
print("rectification residual: %.2f px" % reading.rectification_residual_px)
print()
print("%-10s %10s %10s %8s" % ("chemical", "true", "measured", "conf"))
for kind, m in sorted(reading.measurements.items(), key=lambda kv: kv[0].value):
    true_value = truth.concentrations[kind]
    print("%-10s %10.2f %10.2f %8.2f"
          % (kind.value, true_value, m.value, m.confidence))

errors = [abs(m.value - truth.concentrations[k])
          for k, m in reading.measurements.items()]
print()
print("worst absolute error:", np.round(max(errors), 4))

card = summarize(reading)
print()
print("verdict:", card.overall.value + (" / " + card.headline if card.headline else ""))
for item in card.interpretations:
    print("  %-10s %-7s %s" % (item.chemical.value, item.signal.value,
                               item.headline))
