# scamfqi/core/errors.py - exception hierarchy shared by every module


class ScamFqiError(Exception):
    """Base error. `exit_code` is what the CLI returns when it escapes."""

    exit_code = 3

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ArgumentError(ScamFqiError, ValueError):
    pass


class DegenerateSliceError(ScamFqiError, ValueError):
    """Conditioning on a slice that carries zero probability mass."""

    def __init__(self, owner: int, slice_key: tuple):
        super().__init__(f"Zero-mass conditioning slice {slice_key} for agent {owner}")
        self.owner = owner
        self.slice_key = slice_key


class UnboundedConcentrabilityError(ScamFqiError, ValueError):
    pass


class OracleError(ScamFqiError, RuntimeError):
    pass


class ConfigError(ScamFqiError):
    exit_code = 2


class DatasetParseError(ScamFqiError):
    def __init__(self, path: str, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line


class StageError(ScamFqiError):
    """A pipeline stage failed; `provenance` says where."""

    def __init__(self, stage: str, provenance: dict, reason: str):
        where = ", ".join(f"{k}={v}" for k, v in provenance.items())
        super().__init__(f"{stage} failed ({where}): {reason}")
        self.stage = stage
        self.provenance = provenance
