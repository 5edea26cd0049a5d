"""Exception hierarchy shared by the simulator modules.

Every exception carries the process exit status the CLI reports for it.
"""


class SimulationError(Exception):
    exit_code = 1


class InvalidParameterError(SimulationError, ValueError):
    exit_code = 2


class ConfigError(SimulationError):
    """Bad config file or override. ``line`` is 0 for command-line overrides."""

    exit_code = 2

    def __init__(self, message, line=None, key=None, suggestion=None):
        self.line = line
        self.key = key
        self.suggestion = suggestion
        text = message
        if line is not None:
            text = f"line {line}: {text}"
        if suggestion:
            text = f"{text} (did you mean '{suggestion}'?)"
        super().__init__(text)


class BistabilityError(SimulationError):
    """The operating-point iteration did not converge; possibly bistable."""

    exit_code = 4

    def __init__(self, message, last_iterates):
        self.last_iterates = tuple(last_iterates)
        super().__init__(f"{message} (last iterates: {self.last_iterates[0]!r}, {self.last_iterates[1]!r})")


class InstabilityError(SimulationError):
    exit_code = 3

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class IntegrationDivergedError(SimulationError):
    exit_code = 4

    def __init__(self, time):
        self.time = time
        super().__init__(f"integration diverged (non-finite state) at t={time:.9e} s")


class EigenSolverError(SimulationError):
    exit_code = 4


class VerificationError(SimulationError):
    exit_code = 5
