"""Exception hierarchy.

Every error carries a stable ``code`` (the class name) so the CLI can emit
machine-readable failures. All of them subclass ``ValueError`` because they
signal bad data rather than programming mistakes.
"""


class MotionSeedError(ValueError):
    @property
    def code(self):
        return type(self).__name__

    def to_json(self):
        return {"error": self.code, "message": str(self)}


# attention / tokens
class EmptyTokenSet(MotionSeedError):
    pass


class GridMismatch(MotionSeedError):
    pass


class MissingLayer(MotionSeedError):
    pass


class RecordMismatch(MotionSeedError):
    pass


class InvalidRecord(MotionSeedError):
    pass


# consensus
class DimensionMismatch(MotionSeedError):
    pass


class TooFewSeeds(MotionSeedError):
    pass


class NonFiniteScore(MotionSeedError):
    pass


class ZeroVector(MotionSeedError):
    pass


# transport
class NumericalUnderflow(MotionSeedError):
    pass


class InvalidDistribution(MotionSeedError):
    pass


# compositing
class EmptyMask(MotionSeedError):
    pass


class DegenerateOutput(MotionSeedError):
    pass


class OutOfBounds(MotionSeedError):
    pass


class NoValidPlacement(MotionSeedError):
    def __init__(self, message, rejected=()):
        super().__init__(message)
        self.rejected = list(rejected)


# metrics
class AllFramesLost(MotionSeedError):
    pass


class FirstFrameLost(MotionSeedError):
    pass


class PenultimateLost(MotionSeedError):
    pass


# ranking
class UnknownItem(MotionSeedError):
    pass


class InvalidJudgment(MotionSeedError):
    pass


class UniverseMismatch(MotionSeedError):
    pass


class EmptyMetricSet(MotionSeedError):
    pass


# harness
class TrajectoryLengthMismatch(MotionSeedError):
    pass


# files
class ArchiveFormatError(MotionSeedError):
    pass


class MissingFile(MotionSeedError):
    def __init__(self, message, filename=None):
        super().__init__(message)
        self.filename = filename

    def to_json(self):
        out = super().to_json()
        if self.filename is not None:
            out["filename"] = str(self.filename)
        return out
