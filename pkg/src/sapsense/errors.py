"""Exception types shared across the package.

Every failure that callers are expected to branch on gets its own class so
tests and the relay can match on type rather than message text.
"""


class SapsenseError(Exception):
    """Base class for all package errors."""


class LayoutError(SapsenseError):
    """Chip layout or scale config could not be parsed or validated.

    ``violations`` holds the structured validation findings when the config
    parsed but broke an invariant; it is empty for pure parse errors.
    """

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class UnknownChemical(SapsenseError):
    """A chemical name not in the supported panel."""


class ImageDecodeError(SapsenseError):
    """Bytes or file could not be decoded as a PNG or JPEG image."""


class InsufficientMarkers(SapsenseError):
    """Fewer than three usable fiducial markers were found."""


class AmbiguousAssignment(SapsenseError):
    """Two marker assignments explain the image about equally well."""


class DegenerateGeometry(SapsenseError):
    """Marker geometry is collinear or otherwise cannot fix an affine map."""


class RegionOutOfImage(SapsenseError):
    """A chip region maps partly or fully outside the image."""


class EmptyRegion(SapsenseError):
    """A chip region covers too few pixels to sample."""


class DegenerateColors(SapsenseError):
    """Reference colors are too close together to fit a calibration curve."""


class OutOfRange(SapsenseError):
    """A requested value lies outside the reference scale's span."""


class RuleTableError(SapsenseError):
    """An interpretation rule table is malformed or not exhaustive."""


class PipelineError(SapsenseError):
    """A stage of the analysis pipeline failed.

    Carries the stage name and the underlying error so reports can show
    where analysis stopped.
    """

    def __init__(self, stage, cause):
        super().__init__("analysis failed at stage '%s': %s" % (stage, cause))
        self.stage = stage
        self.cause = cause


class RelayError(SapsenseError):
    """Base class for ingestion relay errors."""


class UnknownDevice(RelayError):
    """deviceId has not been registered."""


class UnknownLayout(RelayError):
    """Registration names a layout or scales id with no definition."""


class PayloadTooLarge(RelayError):
    """Uploaded image exceeds the size cap."""


class UndecodableImage(RelayError):
    """Uploaded bytes are not a decodable PNG or JPEG."""


class InvalidRange(RelayError):
    """Query time range is inverted or malformed."""
