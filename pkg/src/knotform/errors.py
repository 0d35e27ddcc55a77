"""Exception hierarchy shared by all modules."""


class KnotformError(Exception):
    """Base class; the CLI maps every subclass to exit code 2."""


class ParseError(KnotformError):
    pass


class ValidationError(KnotformError):
    pass


class DegenerateCurve(ValidationError):
    """Speed below 1e-12 at a requested parameter."""


class PoleError(KnotformError):
    """A point was sent onto the center of an inversion."""


class CoincidentPoints(KnotformError):
    """Two points that must be distinct are closer than 1e-12."""


class PointOnKnot(KnotformError):
    pass


class CurvesIntersect(KnotformError):
    pass


class InvalidCutoff(KnotformError):
    pass


class DuplicateParameter(KnotformError):
    pass
