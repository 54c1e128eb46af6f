"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for bad parameters,
3 for resource caps, 4 for malformed input, 5 for mathematical
infeasibility that the caller asked us to treat as an error.
"""


class WallpercError(Exception):
    exit_code = 1


class UsageError(WallpercError, ValueError):
    exit_code = 2


class ResourceCap(WallpercError):
    exit_code = 3


class InputError(WallpercError, ValueError):
    exit_code = 4


class Infeasible(WallpercError):
    exit_code = 5


# graph
class DisconnectedGraph(InputError):
    pass


class SelfLoop(InputError):
    pass


class DuplicateEdge(InputError):
    pass


class VertexOutOfRange(InputError):
    pass


class EmptySpec(UsageError):
    pass


class SizeOverflow(ResourceCap):
    pass


# kernels
class NonSymmetric(InputError):
    pass


class NonzeroDiagonal(InputError):
    pass


class NegativeEntry(InputError):
    pass


class SizeMismatch(InputError):
    pass


class NonpositiveLambda(UsageError):
    pass


class NotCND(Infeasible):
    pass


class TooLarge(ResourceCap):
    pass


class VariationViolated(Infeasible):
    def __init__(self, message, pair=None, index=None):
        super().__init__(message)
        self.pair = pair
        self.index = index


# walls
class DegenerateCloud(Infeasible):
    pass


class ZeroSamples(UsageError):
    pass


class NotAnEdge(InputError):
    pass


# percolation
class EmptyFamily(UsageError):
    pass


class NegativeTime(UsageError):
    pass


class TooManyWalls(ResourceCap):
    pass


class TooManyEdges(ResourceCap):
    pass


class BadProbability(UsageError):
    pass


class BadPermutation(UsageError):
    pass


class NonIncreasingEvent(InputError):
    pass


# compression
class ZeroTwoPoint(Infeasible):
    def __init__(self, message, pairs=()):
        super().__init__(message)
        self.pairs = list(pairs)


class NoDecay(Infeasible):
    def __init__(self, message, pairs=()):
        super().__init__(message)
        self.pairs = list(pairs)


class BadAlpha(UsageError):
    pass


class EmptyGrid(UsageError):
    pass


class NonpositiveGamma(UsageError):
    pass
