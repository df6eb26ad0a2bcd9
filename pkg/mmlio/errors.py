# mmlio/errors.py
"""Exception hierarchy shared by every mmlio package."""


class MmlioError(Exception):
    """Base class for all errors raised by mmlio."""


class ConfigError(MmlioError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"Invalid setting '{key}': {message}")


class DatasetError(MmlioError):
    """Dataset I/O or validation failure, with the file (and offset) involved."""

    def __init__(self, path, message, offset=None):
        self.path = str(path)
        self.offset = offset
        where = self.path if offset is None else f"{self.path} @ {offset}"
        super().__init__(f"{where}: {message}")


class RangeError(MmlioError, ValueError):
    pass


class InsufficientPointsError(MmlioError):
    def __init__(self, count, required, what="cloud"):
        self.count = count
        self.required = required
        super().__init__(f"{what} has {count} points, at least {required} required")


class ConvergenceError(MmlioError):
    """Iterative solver gave up; `last_iterate` holds the final estimate."""

    def __init__(self, message, last_iterate=None):
        self.last_iterate = last_iterate
        super().__init__(message)


class FrameMismatchError(MmlioError):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"expected frame '{expected}', got '{got}'")


class QueueOrderError(MmlioError):
    pass


class UndistortionError(MmlioError):
    def __init__(self, index, t, t_start, t_end):
        self.index = index
        super().__init__(
            f"point {index} at t={t:.6f} lies outside the delta interval "
            f"[{t_start:.6f}, {t_end:.6f}]"
        )


class DivergenceError(MmlioError):
    """Optimizer produced non-finite values; `dump` lists the iterations so far."""

    def __init__(self, message, dump=None):
        self.dump = dump or []
        super().__init__(message)


class DuplicateNodeError(MmlioError, KeyError):
    def __init__(self, node_id):
        self.node_id = node_id
        super().__init__(f"node {node_id} already exists")

    def __str__(self):
        return self.args[0]


class DisconnectedGraphError(MmlioError):
    def __init__(self, orphans):
        self.orphans = sorted(orphans)
        super().__init__(f"nodes not connected to node 0: {self.orphans}")


class EvaluationError(MmlioError):
    pass
