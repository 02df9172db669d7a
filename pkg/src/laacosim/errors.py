"""Exception hierarchy shared across the package."""


class LaaSimError(Exception):
    """Base class for every error raised by laacosim."""


class CaseError(LaaSimError, ValueError):
    """A grid case file failed parsing or validation.

    ``problems`` holds one positional message per violated invariant.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ModelError(LaaSimError, ValueError):
    pass


class ReductionError(ModelError):
    def __init__(self, message, buses=()):
        self.buses = tuple(buses)
        super().__init__(message)


class ParameterError(LaaSimError, ValueError):
    pass


class ConfigError(LaaSimError, ValueError):
    pass


class ContractError(LaaSimError, RuntimeError):
    """A caller broke an ordering or timing contract (e.g. time went backwards)."""


class InputFileError(LaaSimError, OSError):
    """An input file could not be read at all."""


class ExcitationError(ConfigError):
    """Offline MDLAA data is not persistently exciting."""
