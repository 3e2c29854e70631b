class NovikovError(Exception):
    pass


class SurfaceFormatError(NovikovError, ValueError):
    pass


class SeedExhaustion(NovikovError):
    """Critical-point counts disagree between seed-grid refinements."""


class NotCritical(NovikovError):
    pass


class MaxArcLength(NovikovError):
    pass


class ProjectionFailure(NovikovError):
    pass


class DanglingSeparatrix(NovikovError):
    pass


class NoSurfaceIntersection(NovikovError):
    pass


class NonIntegral(NovikovError, ValueError):
    pass


class ZeroVector(NovikovError, ValueError):
    pass


class InvalidGenerator(NovikovError, ValueError):
    pass


class DegenerateInput(NovikovError, ValueError):
    pass


class ScanFormatError(NovikovError, ValueError):
    pass


class DegenerateBranching(NovikovError):
    """A non-extremal critical point whose level set does not split into an even number >= 4 of branches."""
