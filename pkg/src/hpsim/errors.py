"""Exception hierarchy.  Every error raised on purpose derives from ``HpsimError``."""


class HpsimError(Exception):
    pass


class NotHermitian(HpsimError, ValueError):
    pass


class NoConvergence(HpsimError, RuntimeError):
    pass


class DimensionMismatch(HpsimError, ValueError):
    pass


class NotCP(HpsimError, ValueError):
    pass


class ParamOutOfRange(HpsimError, ValueError):
    pass


class InvalidSpec(HpsimError, ValueError):
    pass


class IllPosed(HpsimError, ValueError):
    pass


class NotHermitianPreserving(HpsimError, ValueError):
    pass


class SolverFailure(HpsimError, RuntimeError):
    pass


class InvalidCertificate(HpsimError, ValueError):
    pass


class NotDensityMatrix(HpsimError, ValueError):
    pass


class IncompleteInstrument(HpsimError, ValueError):
    pass


class InfeasibleRecovery(HpsimError, ValueError):
    pass
