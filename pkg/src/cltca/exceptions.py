"""Exception types raised across the package.

Every error derives from :class:`TCAError` and from the closest builtin
(``ValueError``, ``IndexError``, ``OSError``) so callers can catch either.
"""


class TCAError(Exception):
    """Base class for all package errors."""


# tensor construction / linear algebra
class LengthMismatch(TCAError, ValueError):
    pass


class NonFiniteEntry(TCAError, ValueError):
    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(f"non-finite entry {value!r} at index {index}")


class InvalidMode(TCAError, ValueError):
    pass


class ColumnMismatch(TCAError, ValueError):
    pass


class DimMismatch(TCAError, ValueError):
    pass


class ZeroTensor(TCAError, ValueError):
    pass


# factor models
class DegenerateComponent(TCAError, ValueError):
    pass


class IndexOutOfRange(TCAError, IndexError):
    pass


class NegativeInput(TCAError, ValueError):
    pass


class RankMismatch(TCAError, ValueError):
    pass


class NotNormalized(TCAError, ValueError):
    pass


class NonSquare(TCAError, ValueError):
    pass


# rank selection
class TooFewRanks(TCAError, ValueError):
    pass


class NoStableRank(TCAError):
    """No rank in the elbow interval clears the similarity threshold."""

    def __init__(self, interval, best_rank, best_similarity, threshold):
        self.interval = interval
        self.best_rank = best_rank
        self.best_similarity = best_similarity
        self.threshold = threshold
        super().__init__(
            f"no rank in {interval[0]}..{interval[1]} has mean replicate "
            f"similarity > {threshold}; best candidate rank {best_rank} "
            f"({best_similarity:.4f})"
        )


# task curation
class EmptyClassSet(TCAError, ValueError):
    pass


class DegenerateInput(TCAError, ValueError):
    pass


class HullTooSmall(TCAError, ValueError):
    pass


class TooManyTasks(TCAError, ValueError):
    pass


# file formats
class NpyFormatError(TCAError, ValueError):
    pass


class BadMagic(NpyFormatError):
    pass


class UnsupportedDtype(NpyFormatError):
    pass


class FortranOrderUnsupported(NpyFormatError):
    pass


class ShapeMismatchAcrossSnapshots(TCAError, ValueError):
    def __init__(self, path, shape, expected):
        self.path = path
        self.shape = shape
        self.expected = expected
        super().__init__(
            f"{path}: snapshot shape {shape} differs from {expected}"
        )


class EmptyManifest(TCAError, ValueError):
    pass


class ManifestError(TCAError, ValueError):
    pass


class InvalidSpec(TCAError, ValueError):
    pass
