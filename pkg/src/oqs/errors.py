"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for rejected input, 3 for a numerical failure.
"""


class OqsError(Exception):
    exit_code = 3


class InputError(OqsError):
    exit_code = 2


class NumericalError(OqsError):
    exit_code = 3


class ZeroPolynomial(InputError):
    pass


class DomainError(InputError):
    pass


class BadGrid(InputError):
    pass


class WrongKind(InputError):
    pass


class DegenerateCoupling(InputError):
    pass


class LightConeViolation(InputError):
    pass


class PoleHit(InputError):
    pass


class NoConvergence(NumericalError):
    pass


class SingularJacobian(NumericalError):
    pass


class EmptyBox(NumericalError):
    pass


class TrackingLost(NumericalError):
    pass


class DegenerateSpectrum(NumericalError):
    pass


class SingularTruncation(NumericalError):
    pass


class TooFewPeaks(NumericalError):
    pass
