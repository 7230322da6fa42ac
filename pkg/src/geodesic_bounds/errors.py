"""Exception hierarchy shared by all modules."""


class GeodesicError(Exception):
    """Base class for every error raised by this package."""


# --- mesh construction -----------------------------------------------------

class MeshError(GeodesicError):
    pass


class NonManifold(MeshError):
    pass


class DegenerateTriangle(MeshError):
    pass


class EndMismatch(MeshError):
    pass


class NonOrientable(MeshError):
    pass


class Disconnected(MeshError):
    pass


class CurveOffMesh(GeodesicError):
    pass


# --- generators --------------------------------------------------------------

class TooManyCusps(MeshError):
    pass


class InfiniteArea(MeshError):
    pass


class NonPositiveProfile(MeshError):
    pass


# --- geodesic engine ---------------------------------------------------------

class SingularLevel(GeodesicError):
    pass


class NoPath(GeodesicError):
    pass


class NotMinimizing(GeodesicError):
    pass


class AmbiguousSide(GeodesicError):
    pass


# --- shortening --------------------------------------------------------------

class BudgetExceeded(GeodesicError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InvalidCertificate(GeodesicError):
    pass


class RegionNotConvex(GeodesicError):
    pass


# --- loop finder -------------------------------------------------------------

class HypothesisViolated(GeodesicError):
    pass


class NoAdmissibleT(GeodesicError):
    pass


class AllContracted(GeodesicError):
    pass


class NonSeparating(GeodesicError):
    def __init__(self, message, loop=None):
        super().__init__(message)
        self.loop = loop


class LineScanInconclusive(GeodesicError):
    def __init__(self, message, scan=None):
        super().__init__(message)
        self.scan = scan


# --- pipelines ---------------------------------------------------------------

class Inconclusive(GeodesicError):
    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump


class Inconsistent(GeodesicError):
    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump


class AngleGapUncovered(GeodesicError):
    pass


class LengthBudgetExceeded(GeodesicError):
    def __init__(self, message, slice_index=None):
        super().__init__(message)
        self.slice_index = slice_index


class PreconditionFailed(GeodesicError):
    pass


class NoneFound(GeodesicError):
    def __init__(self, message, histogram=None):
        super().__init__(message)
        self.histogram = histogram


class ConfigError(GeodesicError):
    pass
