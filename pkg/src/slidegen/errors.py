"""Exception base shared by every slidegen module."""


class SlidegenError(Exception):
    """Root of all errors raised by slidegen."""
