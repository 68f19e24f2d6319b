"""Exception hierarchy shared by all adeval modules."""


class AdEvalError(Exception):
    """Base class for all domain errors raised by this package."""


# --- ingest ---------------------------------------------------------------


class MalformedLine(AdEvalError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class NonMonotonicTimestamps(AdEvalError):
    def __init__(self, line_no: int):
        super().__init__(f"timestamps go backwards at line {line_no}")
        self.line_no = line_no


class MalformedCue(AdEvalError):
    def __init__(self, cue_no: int, reason: str):
        super().__init__(f"cue {cue_no}: {reason}")
        self.cue_no = cue_no
        self.reason = reason


class MalformedSubmission(AdEvalError):
    pass


class UnknownSegment(AdEvalError):
    def __init__(self, segment_ids):
        ids = [segment_ids] if isinstance(segment_ids, str) else list(segment_ids)
        super().__init__(f"unknown segment id(s): {', '.join(ids)}")
        self.segment_ids = ids


class EmptyPlot(AdEvalError):
    pass


class SchemaViolation(AdEvalError):
    def __init__(self, qid: str, reason: str):
        super().__init__(f"question {qid!r}: {reason}")
        self.qid = qid
        self.reason = reason


# --- gateway --------------------------------------------------------------


class MissingVariable(AdEvalError):
    def __init__(self, name: str):
        super().__init__(f"unresolved template variable {{{name}}}")
        self.name = name


class TransportError(AdEvalError):
    """Provider unreachable or persistently failing after retries."""

    def __init__(self, reason: str, retryable: bool = False):
        super().__init__(reason)
        self.retryable = retryable


class SchemaError(AdEvalError):
    """Model output failed shape validation even after the repair round-trip.

    ``value`` carries the last JSON value that could be extracted (or None)
    so callers can salvage partially usable output.
    """

    def __init__(self, reason: str, value=None):
        super().__init__(reason)
        self.value = value


# --- alignment ------------------------------------------------------------


class InsufficientAnchors(AdEvalError):
    pass


class DegenerateInterval(AdEvalError):
    pass


# --- similarity -----------------------------------------------------------


class EmptyText(AdEvalError):
    pass


class TooFewPairs(AdEvalError):
    pass


# --- answering ------------------------------------------------------------


class MissingADSource(AdEvalError):
    pass


class QidMismatch(AdEvalError):
    pass


class DegenerateBaseline(AdEvalError):
    pass
