"""Exception hierarchy. Everything raised on purpose derives from ``MvregError``."""


class MvregError(Exception):
    pass


class AngleNearPi(MvregError, ValueError):
    pass


class NotSymmetric(MvregError, ValueError):
    pass


class EmptyInput(MvregError, ValueError):
    pass


class DegenerateCluster(MvregError, ValueError):
    pass


class CholeskyFailure(MvregError, ValueError):
    pass


class LengthMismatch(MvregError, ValueError):
    pass


class InvalidProblem(MvregError, ValueError):
    pass


class SingularNormalEquations(MvregError, RuntimeError):
    pass


class NoActiveVoxels(MvregError, RuntimeError):
    pass


class ConfigError(MvregError, ValueError):
    pass


class ParseError(MvregError, ValueError):
    pass


class UnsupportedFormat(ParseError):
    pass


class NonUnitQuaternion(ParseError):
    pass
