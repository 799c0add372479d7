"""Named domain errors. The CLI maps any ``BpeKitError`` to exit code 1."""


class BpeKitError(Exception):
    """Base class for every domain error raised by this package."""


class ConfigInvalid(BpeKitError, ValueError):
    pass


class DuplicateSpecial(ConfigInvalid):
    pass


class CorpusEmpty(BpeKitError, ValueError):
    pass


class IdOutOfRange(BpeKitError, IndexError):
    pass


class InvalidConversation(BpeKitError, ValueError):
    pass


class GrammarError(BpeKitError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class SchemaError(BpeKitError, ValueError):
    pass


class SourceExhausted(BpeKitError):
    def __init__(self, message: str, achieved: dict):
        super().__init__(message)
        self.achieved = achieved


class InvalidRank(BpeKitError, ValueError):
    pass


class EmptyEncoding(BpeKitError, ValueError):
    pass


class EmptyCorpus(BpeKitError, ValueError):
    pass


class DivideByZero(BpeKitError, ZeroDivisionError):
    pass
