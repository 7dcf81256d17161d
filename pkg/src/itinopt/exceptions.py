"""Exception hierarchy shared by all itinopt modules."""


class ItinOptError(Exception):
    """Base class for every error raised by itinopt."""

    code = "internal_error"
    http_status = 500

    def __init__(self, message: str = "", diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class IndexOutOfRange(ItinOptError, IndexError):
    code = "index_out_of_range"
    http_status = 400


class InvalidSpec(ItinOptError, ValueError):
    code = "invalid_spec"
    http_status = 400


class ParseError(ItinOptError, ValueError):
    code = "parse_error"
    http_status = 400


class SchemaViolation(ItinOptError, ValueError):
    code = "schema_violation"
    http_status = 400


class InvalidStart(ItinOptError, ValueError):
    code = "invalid_start"
    http_status = 400


class LengthMismatch(ItinOptError, ValueError):
    code = "length_mismatch"
    http_status = 400


class NoFeasibleSolution(ItinOptError):
    code = "no_feasible_solution"
    http_status = 422


class EmptyFront(ItinOptError, ValueError):
    code = "empty_front"
    http_status = 422


class InsufficientData(ItinOptError, ValueError):
    code = "insufficient_data"
    http_status = 400


class SingularDesign(ItinOptError, ValueError):
    code = "singular_design"
    http_status = 400


class UnknownCatalog(ItinOptError, KeyError):
    code = "unknown_catalog"
    http_status = 404

    def __str__(self):
        return Exception.__str__(self)


class OptimizerFailed(ItinOptError):
    code = "optimizer_failed"
    http_status = 422

    def __init__(self, message: str = "", inner: Exception | None = None, diagnostics=None):
        super().__init__(message, diagnostics)
        self.inner = inner


class DuplicateRequest(ItinOptError):
    code = "duplicate_request"
    http_status = 409


class TopicClosed(ItinOptError):
    code = "topic_closed"
    http_status = 503


class ServerUnreachable(ItinOptError, ConnectionError):
    code = "server_unreachable"
    http_status = 503
