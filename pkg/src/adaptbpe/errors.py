"""Exception hierarchy. Every error a user can trigger with bad data derives
from :class:`AdaptBPEError`, which the CLI maps to exit code 2."""


class AdaptBPEError(Exception):
    pass


class ImproperMerge(AdaptBPEError):
    def __init__(self, index: int, detail: str = ""):
        self.index = index
        msg = f"ImproperMerge: merge {index} uses a parent that is not yet available"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class DuplicateSymbol(AdaptBPEError):
    pass


class OutOfRange(AdaptBPEError, IndexError):
    pass


class UnsupportedPattern(AdaptBPEError):
    pass


class UnknownSymbol(AdaptBPEError):
    """A pre-token contains a unit outside the table's base alphabet."""


class UnknownId(AdaptBPEError):
    pass


class UnknownToken(AdaptBPEError):
    pass


class EmptySet(AdaptBPEError):
    pass


class BudgetTooLarge(AdaptBPEError):
    pass


class EmptyCorpus(AdaptBPEError):
    pass


class InsufficientLiveMerges(AdaptBPEError):
    pass


class UnsupportedModelType(AdaptBPEError):
    pass


class MalformedMerge(AdaptBPEError):
    def __init__(self, line: int, detail: str = ""):
        self.line = line
        super().__init__(f"MalformedMerge at merge {line}" + (f": {detail}" if detail else ""))


class VocabMergeMismatch(AdaptBPEError):
    pass


class DigestMismatch(AdaptBPEError):
    pass
