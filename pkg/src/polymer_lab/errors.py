"""Exception hierarchy shared by every module of the package."""


class PolymerLabError(Exception):
    """Base class for all errors raised by polymer_lab."""


class CapExceeded(PolymerLabError):
    """The brute-force enumeration would produce more paths than allowed."""


class OutOfRegion(PolymerLabError):
    """A lattice point has no realized weight in the environment."""


class RegionTooSmall(OutOfRegion):
    """The environment does not cover the cone of points a query can reach."""


class InvalidSpec(PolymerLabError, ValueError):
    """A weight distribution was given nonpositive or missing parameters."""


class InadmissibleSpec(PolymerLabError):
    """The weight laws violate an assumption an experiment depends on."""


class InvalidQuery(PolymerLabError, ValueError):
    """Endpoints are infeasible or the mask excludes an endpoint."""


class UnsupportedEvent(PolymerLabError):
    """An event cannot be expressed in the segment/interval algebra."""


class PreconditionViolated(PolymerLabError, ValueError):
    pass


class DegenerateSample(PolymerLabError):
    """A sample has zero variance and cannot be standardized."""


class LayoutInvalid(PolymerLabError, ValueError):
    pass


class ConfigInvalid(PolymerLabError):
    """An experiment configuration failed validation.

    ``path`` locates the offending field, e.g. ``"model.bulk.rate"``.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message


class IoError(PolymerLabError, OSError):
    """Results could not be written."""
