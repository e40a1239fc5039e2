"""Exception taxonomy shared across the package.

Every error raised by cerealia code derives from CerealiaError so callers can
catch the whole family with one clause. Subclasses mark the rough category;
messages carry the specifics (attribute names, indices, expected vs actual).
"""


class CerealiaError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(CerealiaError):
    """Attribute schema is malformed or data disagrees with it."""


class EmptyInputError(CerealiaError):
    """An operation received fewer samples than it minimally needs."""


class RangeError(CerealiaError):
    """A parameter is outside its documented domain."""


class ShapeError(CerealiaError):
    """An array has the wrong shape for the trained or declared layout."""


class CsvFormatError(CerealiaError):
    """The CSV header or file layout cannot be reconciled with the schema."""


class RejectRatioError(CerealiaError):
    """Too large a fraction of CSV rows failed row-level validation."""


class DegenerateDatasetError(CerealiaError):
    """A training set lacks the variety the trainer requires."""


class DivergenceError(CerealiaError):
    """Training produced a non-finite loss."""


class ModelFileError(CerealiaError):
    """A persisted model file is unreadable or not a model file at all."""


class ModelVersionError(ModelFileError):
    """A persisted model file has an incompatible format version."""


class ImputerError(CerealiaError):
    """Imputer fitting or application failed; message says why."""


class WarmUpError(CerealiaError):
    """A streaming component was asked to act before its warm-up completed."""


class StorageError(CerealiaError):
    """The append-only history store hit an I/O fault."""
