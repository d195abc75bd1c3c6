"""Exception hierarchy with stable machine-readable codes and CLI exit codes."""


class MergenomeError(Exception):
    """Base class for all toolkit errors."""

    code = "internal"
    exit_code = 1


class InputFormatError(MergenomeError):
    """Unreadable or malformed input data (exit 3)."""

    code = "input"
    exit_code = 3


class ContainerHeaderError(InputFormatError):
    code = "container-header"


class ContainerRangeError(InputFormatError):
    code = "container-range"


class DuplicateTensorError(InputFormatError):
    code = "container-duplicate-name"


class UnsupportedDtypeError(InputFormatError):
    code = "container-dtype"


class ProbeDumpError(InputFormatError):
    code = "probe-dump"


class IncompatibilityError(MergenomeError):
    """Inputs are individually valid but cannot be combined (exit 4)."""

    code = "incompatible"
    exit_code = 4


class NoSharedTensorsError(IncompatibilityError):
    code = "no-shared-tensors"


class PlanCoverageError(IncompatibilityError):
    code = "plan-missing-tensors"

    def __init__(self, names):
        self.names = sorted(names)
        super().__init__("tensors missing from importance report: " + ", ".join(self.names))


class ExecutionShapeError(IncompatibilityError):
    code = "shape-mismatch"


class EvaluationError(MergenomeError):
    """Candidate evaluation failed (exit 5)."""

    code = "evaluator"
    exit_code = 5


class EvaluatorExitError(EvaluationError):
    code = "evaluator-exit"


class EvaluatorTimeoutError(EvaluationError):
    code = "evaluator-timeout"


class EvaluatorOutputError(EvaluationError):
    code = "evaluator-output"


class AllCandidatesFailedError(EvaluationError):
    code = "all-candidates-failed"
