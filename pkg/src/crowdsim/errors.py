"""Exception types shared across the package."""


class CrowdSimError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(CrowdSimError, ValueError):
    """A caller-supplied parameter is out of its documented range."""


class ValidationError(CrowdSimError):
    """Inputs are structurally valid but fail a pre-run consistency check
    (e.g. an experiment grid is missing coverage for a required cell)."""


class RegionTooDenseError(CrowdSimError, RuntimeError):
    """Rejection sampling could not place the requested number of
    pedestrians within the attempt budget."""

    def __init__(self, requested: int, achieved: int):
        self.requested = requested
        self.achieved = achieved
        super().__init__(
            f"region too dense: placed {achieved} of {requested} pedestrians"
        )


class FormatError(CrowdSimError):
    """A binary container (weights or density file) is malformed."""
