"""Exception types that carry a CLI exit status."""


class RootSCCError(Exception):
    exit_code = 3

    def __init__(self, message: str, stage: str | None = None):
        super().__init__(message)
        self.stage = stage

    def __str__(self):
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class ConfigError(RootSCCError):
    exit_code = 1


class DataError(RootSCCError):
    exit_code = 2


class InvariantError(RootSCCError):
    exit_code = 3
