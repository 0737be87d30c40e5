import logging
import timeit
from contextlib import contextmanager

from fsp_slam.utils.log import get_logger


class Timer:
    def __init__(self):
        """Helper class for timing code blocks.
        ``t0`` is set to the current time when the class is instantiated.
        """
        self.t0 = timeit.default_timer()
        self.start = self.t0

    def __call__(self) -> float:
        """Return the time since the last call or ``__init__``."""
        now = timeit.default_timer()
        timedelta = now - self.t0
        self.t0 = now
        return timedelta

    @property
    def total(self) -> float:
        """Time since ``__init__``, not affected by calls."""
        return timeit.default_timer() - self.start


@contextmanager
def timing(name="Codeblock", logger=None, timings: dict[str, float] | None = None):
    """Context manager for timing code blocks.

    Args:
        name: Name of the code block in the log message
        logger: Logger to use. Defaults to a ``timing`` logger at INFO level.
        timings: If given, the elapsed time is stored under ``name``
    """
    if logger is None:
        logger = get_logger("timing", level=logging.INFO)
    t = Timer()
    try:
        yield
    finally:
        elapsed = t()
        if timings is not None:
            timings[name] = elapsed
        logger.info("%s took %f seconds", name, elapsed)
