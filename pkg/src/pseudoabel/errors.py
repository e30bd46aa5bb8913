"""Exception types raised by the numerical routines."""


class PseudoabelError(Exception):
    """Base class for all numerical failures in this package."""


class SectorOutOfRange(PseudoabelError):
    pass


class CertificateLoss(PseudoabelError):
    pass


class NearPole(PseudoabelError):
    pass


class DivergentIntegral(PseudoabelError):
    pass


class ContourInvalid(PseudoabelError):
    pass


class ZeroOnContour(PseudoabelError):
    pass


class DegenerateLeadingTerm(PseudoabelError):
    pass


class ResidualNotZero(PseudoabelError):
    pass


class BranchError(PseudoabelError):
    """A factor of the first integral is non-positive at the query point."""


class OnSeparatrix(PseudoabelError):
    pass


class NoCenterFound(PseudoabelError):
    pass


class TraceDiverged(PseudoabelError):
    pass


class SaddleTooClose(TraceDiverged):
    pass


class PoleOnOval(PseudoabelError):
    pass


class TransversalityFailure(PseudoabelError):
    pass


class InversionDiverged(PseudoabelError):
    pass
