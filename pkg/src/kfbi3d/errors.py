"""Exception types raised by the solver pipeline."""


class KFBIError(Exception):
    """Base class for all solver errors."""


class InvalidN(KFBIError, ValueError):
    pass


class MultipleRootsInCell(KFBIError):
    """The level set changes sign more than once on one stencil arm; refine the grid."""


class DegenerateGradient(KFBIError):
    pass


class RankDeficientFit(KFBIError):
    pass


class SingularClosure(KFBIError):
    pass


class MissingCrossingData(KFBIError):
    pass


class NoValidStencil(KFBIError):
    pass


class CGNoConvergence(KFBIError):
    pass


class IndefiniteOperator(KFBIError):
    pass


class GMRESNoConvergence(KFBIError):
    pass


class EmptyInterior(KFBIError):
    pass


class ConfigError(KFBIError, ValueError):
    pass
