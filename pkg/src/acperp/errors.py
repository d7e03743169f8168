"""Exception types shared across the package."""


class AcperpError(Exception):
    """Base class for all errors raised by this package."""


class FamilyMismatch(AcperpError):
    """The requested family kind is incompatible with the parameters."""


class NoRealRoots(AcperpError):
    """The quartic first integral has no admissible positive roots."""


class OutOfDomain(AcperpError):
    """A radial position lies outside the profile domain."""


class PoleEvaluation(AcperpError):
    """A tensor that is singular where f vanishes was evaluated at a pole."""


class DegenerateGap(AcperpError):
    """The shifted eigenvalues coincide, so an identity has a zero denominator."""


class NegativeGap(AcperpError):
    """lambda - mu < 0 somewhere, so no Einstein-Weyl pair can be built.

    ``witness`` is a radial position where the gap is negative.
    """

    def __init__(self, witness, gap):
        super().__init__(f"lambda - mu = {gap:.6g} < 0 at t = {witness:.6g}")
        self.witness = witness
        self.gap = gap


class BlowUp(AcperpError):
    """The warp function escaped to the ceiling in finite time.

    ``profile`` holds the solution truncated at the escape time ``t``.
    """

    def __init__(self, t, profile=None):
        super().__init__(f"warp function exceeded ceiling at t = {t:.12g}")
        self.t = t
        self.profile = profile
