"""Exception hierarchy shared by all modules."""


class FiberBunchError(Exception):
    """Base class for every error raised by the package."""


class InvalidShift(FiberBunchError, ValueError):
    """Adjacency data does not define a mixing subshift of finite type."""


class InadmissiblePoint(FiberBunchError, ValueError):
    """A sequence uses a transition forbidden by the adjacency matrix."""


class BracketUndefined(FiberBunchError):
    """Local product requested for points with different zeroth symbols."""


class ClosingInadmissible(FiberBunchError):
    """The wrap transition of an orbit segment is forbidden."""


class DimensionMismatch(FiberBunchError, ValueError):
    pass


class IllConditioned(FiberBunchError, ValueError):
    """Matrix is singular or too badly conditioned to be trusted."""


class NotOnLeaf(FiberBunchError):
    """Points are not on a common stable (or unstable) leaf."""


# kept for readers who look for the stable-leaf name
NotOnStableLeaf = NotOnLeaf


class NoCertificate(FiberBunchError):
    """Holonomies were requested without a fiber bunching certificate."""


class HolonomyDiverged(FiberBunchError):
    pass


class NotConjugate(FiberBunchError):
    """The intertwining space contains no invertible operator."""


class DefectExceeded(FiberBunchError):
    """Stable and unstable constructions of the conjugacy disagree."""

    def __init__(self, message, point=None, defect=None):
        super().__init__(message)
        self.point = point
        self.defect = defect


class BudgetExceeded(FiberBunchError):
    pass
