"""Exceptions raised while reading the binary grid and checkpoint formats."""


class FormatError(ValueError):
    """Base class for malformed input files."""


class BadMagicError(FormatError):
    pass


class VersionError(FormatError):
    pass


class SizeMismatchError(FormatError):
    """File is truncated, has trailing bytes, or disagrees with its header."""


class MixedCellError(FormatError):
    """A grid cell is missing on some days but not on others."""


class CsvFormatError(FormatError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
