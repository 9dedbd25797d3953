"""Exception types shared across the package."""


class ParadetError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(ParadetError):
    """An operation received arrays whose shapes do not fit together."""


class GraphError(ParadetError):
    """Backward pass requested on a tensor with no recorded computation."""


class DataError(ParadetError):
    """A corpus, embedding, or provider file failed to parse.

    Carries the offending path and 1-based line number when known so the
    CLI can print an actionable diagnostic.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:" if line is None else f"{path}:{line}: "
        super().__init__(prefix + message)


def open_text(path):
    """Open a UTF-8 text file, reporting unreadable paths as DataError."""
    try:
        return open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read file: {exc}", path=path)


class NumericError(ParadetError):
    """Training produced a non-finite value."""


class CheckpointError(ParadetError):
    """A checkpoint file is malformed, truncated, or version-incompatible."""
