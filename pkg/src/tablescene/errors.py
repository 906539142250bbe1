"""Exception hierarchy shared by all modules.

Each class carries the process exit code the CLI reports for it.
"""


class TableSceneError(Exception):
    exit_code = 1


class UsageError(TableSceneError):
    exit_code = 2


class SchemaError(TableSceneError):
    """Malformed or inconsistent input (unknown predicate, dangling id, ...)."""

    exit_code = 3


class ParseError(SchemaError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class InvalidSceneError(SchemaError):
    pass


class CapacityError(TableSceneError):
    """Too many ground query atoms for exhaustive enumeration."""

    exit_code = 3


class InfeasibleModelError(TableSceneError):
    exit_code = 4

    def __init__(self, message, violated=()):
        super().__init__(message)
        self.violated = list(violated)


class OracleMismatchError(TableSceneError):
    exit_code = 5


class BehindCameraError(TableSceneError):
    pass


class DegenerateTripleError(TableSceneError):
    pass


class InsufficientDataError(TableSceneError):
    pass


class RefinementFailedError(TableSceneError):
    pass


class NothingToSampleError(TableSceneError):
    pass


class PlacementError(TableSceneError):
    pass
