"""Exceptions raised by the SLAM backend, the simulator and the pipeline."""


class FspSlamError(Exception):
    """Base class of all errors raised by this package."""


class PointBehindCamera(FspSlamError, ValueError):
    """Point has (almost) zero or negative depth in the camera frame."""


class DegenerateParam(FspSlamError, ValueError):
    """Landmark parameters outside of their domain (e.g., non-positive inverse
    depth).
    """


class DegenerateView(FspSlamError, ValueError):
    """Single-view initialization impossible from the given corner pixels."""


class EmptyBuffer(FspSlamError, ValueError):
    pass


class NonMonotonicTimestamps(FspSlamError, ValueError):
    pass


class DegenerateInterval(FspSlamError, ValueError):
    """Preintegration interval of zero or negative length."""


class OutOfRange(FspSlamError, ValueError):
    pass


class LengthMismatch(FspSlamError, ValueError):
    pass


class MissingLandmark(FspSlamError, ValueError):
    pass


class ConfigError(FspSlamError, ValueError):
    pass


class UnknownVariable(FspSlamError, KeyError):
    pass


class SingularHessian(FspSlamError, RuntimeError):
    pass


class NotConverged(FspSlamError, RuntimeError):
    pass


class SolverError(FspSlamError, RuntimeError):
    pass
