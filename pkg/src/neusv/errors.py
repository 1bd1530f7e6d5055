"""Exception hierarchy shared by every stage of the pipeline."""


class NeusVError(Exception):
    """Base class for all library errors."""


# -- temporal logic ---------------------------------------------------------

class FormulaSyntaxError(NeusVError, ValueError):
    def __init__(self, message, text="", line=1, column=1):
        self.line = line
        self.column = column
        self.text = text
        super().__init__(f"{message} (line {line}, column {column})")


class EmptyFormulaError(FormulaSyntaxError):
    def __init__(self):
        super().__init__("empty formula")


class UnknownAtomError(NeusVError, KeyError):
    def __init__(self, phrase, known=()):
        self.phrase = phrase
        self.known = tuple(known)
        super().__init__(phrase)

    def __str__(self):
        return f"unknown proposition {self.phrase!r}"


class PropositionError(NeusVError, ValueError):
    """Raised for empty or duplicate propositions."""


class WidthMismatchError(NeusVError, ValueError):
    pass


# -- automaton / checking ---------------------------------------------------

class ConfidenceDomainError(NeusVError, ValueError):
    pass


class InvalidThresholdError(NeusVError, ValueError):
    pass


class EmptyTraceError(NeusVError, ValueError):
    pass


class UncalibratedTraceError(NeusVError, ValueError):
    pass


class PropositionMismatchError(NeusVError, ValueError):
    pass


class StateExplosionError(NeusVError, RuntimeError):
    pass


class InstanceTooLargeError(NeusVError, ValueError):
    pass


class ResidualAtomError(NeusVError, RuntimeError):
    """An atom survived to the end of a trace outside a non-empty guard."""


# -- scoring ----------------------------------------------------------------

class EmptyDistributionError(NeusVError, ValueError):
    pass


class NoModesError(NeusVError, ValueError):
    pass


class CorrelationError(NeusVError, ValueError):
    pass


# -- perception -------------------------------------------------------------

class MalformedAnswerError(NeusVError, ValueError):
    def __init__(self, answer):
        self.answer = answer
        super().__init__(f"expected a Yes/No answer, got {answer!r}")


class TransportError(NeusVError, RuntimeError):
    pass


class ContextLimitError(NeusVError, ValueError):
    pass


class TraceSchemaError(NeusVError, ValueError):
    pass


class MissingKeyError(NeusVError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing key"


class SingleClassError(NeusVError, ValueError):
    pass


# -- translation / pipeline -------------------------------------------------

class TranslationError(NeusVError, ValueError):
    def __init__(self, message, raw_output=None):
        self.raw_output = raw_output
        super().__init__(message)


class FewShotStoreError(NeusVError, ValueError):
    pass


class TooFewFramesError(NeusVError, ValueError):
    pass


class ProfileError(NeusVError, ValueError):
    pass


class SpecFileError(NeusVError, ValueError):
    pass
