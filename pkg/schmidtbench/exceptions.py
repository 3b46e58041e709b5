class SchmidtBenchError(Exception):
    """Base class for every error raised by schmidtbench."""


class InvalidSpectrumError(SchmidtBenchError, ValueError):
    pass


class InvalidGainError(SchmidtBenchError, ValueError):
    pass


class DomainError(SchmidtBenchError, ValueError):
    pass


class ResolutionError(SchmidtBenchError, ValueError):
    def __init__(self, scale, points_per_width, required):
        self.scale = scale
        self.points_per_width = points_per_width
        self.required = required
        super().__init__(
            f"grid under-resolves the {scale}: {points_per_width:.2f} "
            f"points per 1/e width, at least {required} required"
        )


class AliasingError(SchmidtBenchError, RuntimeError):
    pass


class ComputationError(SchmidtBenchError, ArithmeticError):
    pass


class DegenerateBatchError(SchmidtBenchError, ZeroDivisionError):
    pass


class OverflowGuardError(SchmidtBenchError, OverflowError):
    pass


class CalibrationError(SchmidtBenchError, RuntimeError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class ConfigError(SchmidtBenchError, ValueError):
    def __init__(self, message, problems=()):
        self.problems = list(problems)
        if self.problems:
            message = message + ":\n  " + "\n  ".join(self.problems)
        super().__init__(message)


class OutputError(SchmidtBenchError, OSError):
    pass
