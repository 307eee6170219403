"""Exceptions raised by lakeunion.

Library code raises these, the command line interface maps them to exit
codes (see :mod:`lakeunion.cli`).
"""


class LakeUnionError(Exception):
    pass


class LakeIOError(LakeUnionError, OSError):
    """A lake table, knowledge base file or index file can't be read or
    written.
    """


class TableFormatError(LakeUnionError):
    """A CSV file is not a well formed table (ragged rows, no columns)."""


class BadColumn(LakeUnionError):
    pass


class KbFormatError(LakeUnionError):
    pass


class KbCycleError(KbFormatError):
    pass


class KbMultiRootError(KbFormatError):
    pass


class KbDanglingReference(KbFormatError):
    """A type or entity is referenced but never declared."""


class UnknownType(LakeUnionError):
    pass


class NoMappedValues(LakeUnionError):
    pass


class IndexVersionError(LakeUnionError):
    pass


class IntentNotTextual(LakeUnionError):
    pass


class UnknownIntent(LakeUnionError):
    pass


class EmptyIntentSemantics(LakeUnionError):
    """The intent column maps neither to the knowledge base nor to the
    synthesized knowledge base, so there is nothing to search with.
    """


class EmptyTruth(LakeUnionError):
    pass
