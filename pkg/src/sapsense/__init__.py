"""sapsense: reads plant-guttation colorimetric chips from photos.

A chip collects guttation droplets into six colorimetric test circles, each
flanked by four printed reference bars. The package locates the chip through
its corner fiducials, rectifies to chip coordinates, samples colors, fits a
calibration curve per chemical, quantifies concentrations and interprets
them for plant health. A synthetic renderer provides ground-truth imagery,
and a relay server ingests uploads from field devices.
"""

from .chip import (
    CHEMICAL_ORDER,
    ChemicalKind,
    ChipLayout,
    Clearances,
    Color,
    MarkerTag,
    ReferenceScale,
    RegionKind,
    RegionSpec,
    ScaleKnot,
    Violation,
    default_layout,
    default_scales,
    load_layout,
    load_scales,
    serialize_config,
    serialize_layout,
    validate_layout,
    validate_scales,
)
from .calibration import (
    CalibrationCurve,
    Measurement,
    concentration_at,
    fit_curve,
    project,
    quantify,
    t_for_concentration,
)
from .imaging import (
    AnalysisConfig,
    ChipReading,
    ReadingStatus,
    analyze,
    decode_image,
    detect_fiducials,
    estimate_rectification,
    sample_color,
)
from .interpretation import (
    Interpretation,
    ReadingContext,
    ReportCard,
    Signal,
    default_rule_table,
    interpret,
    load_rule_table,
    summarize,
    validate_rule_table,
)
from .synth import (
    CorpusManifest,
    CorpusSpec,
    TruthCase,
    generate_corpus,
    render_chip,
    truth_transform,
)

# The relay server and CLI stay import-on-demand (sapsense.relay, sapsense.cli)
# so library use never drags in FastAPI.

__version__ = "0.1.0"
