"""Exception types shared across the engine."""


class SurgqError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(SurgqError):
    pass


class InvalidClassId(SurgqError):
    def __init__(self, value, position=None):
        self.value = value
        self.position = position
        where = f" at {position}" if position is not None else ""
        super().__init__(f"invalid class id {value}{where} (expected 0..8)")


class NonContiguousSectionIds(SurgqError):
    pass


class InvalidGrid(SurgqError):
    pass


class MissingSection(SurgqError):
    def __init__(self, section_id):
        self.section_id = section_id
        super().__init__(f"assignment missing section {section_id}")


class EmptySeries(SurgqError):
    pass


class DegenerateRing(SurgqError):
    pass


class EmptyCorpus(SurgqError):
    pass


class EmptyIndex(SurgqError):
    pass


class GridMismatch(SurgqError):
    pass


class RaggedJudgments(SurgqError):
    pass


class LengthMismatch(SurgqError):
    pass


class DanglingFrameRef(SurgqError):
    pass


class DanglingSection(SurgqError):
    pass


class EmptyCorrectSet(SurgqError):
    pass


class PathTooShort(SurgqError):
    pass


class UnknownOption(SurgqError):
    pass


class BackendUnavailable(SurgqError):
    pass


class CorruptManifest(SurgqError):
    pass


class MissingAsset(SurgqError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"missing asset: {path}")


class UnknownSourceClass(SurgqError):
    pass


class InvalidSpec(SurgqError):
    pass


class ProjectLocked(SurgqError):
    pass
