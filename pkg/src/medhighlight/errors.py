"""Exception hierarchy shared by every module.

The CLI maps any ``HighlightError`` to exit status 1.
"""


class HighlightError(Exception):
    """Base class for data and model errors."""


# corpus
class SpanMismatch(HighlightError):
    pass


class ParseError(HighlightError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(ParseError):
    pass


class LabelLengthError(ParseError):
    pass


class LengthMismatch(HighlightError):
    pass


class EmptyLexicon(HighlightError):
    pass


# tfidf / classify
class EmptyCorpus(HighlightError):
    pass


class SingleClassError(HighlightError):
    pass


class NonFiniteLoss(HighlightError):
    pass


# lime
class EmptyMessage(HighlightError):
    pass


class DegenerateDesign(HighlightError):
    pass


# tagger
class FormatError(HighlightError):
    pass


class DimMismatch(FormatError):
    pass


class SequenceTooLong(HighlightError):
    pass


# eval
class SingleClass(HighlightError):
    pass


class InsufficientData(HighlightError):
    pass


class NotEnoughChats(HighlightError):
    pass


# report
class AlignmentError(HighlightError):
    pass
