"""Exception hierarchy. Every error carries the exit code the CLI reports for it."""


class GuidenetError(Exception):
    exit_code = 1


# --- CONFIGURATION / CONTRACT ---
class ConfigError(GuidenetError):
    exit_code = 2


class DegenerateBatchError(ConfigError):
    pass


class DimensionError(GuidenetError, ValueError):
    exit_code = 2


class ContractError(GuidenetError):
    exit_code = 2


# --- NUMERICS ---
class NumericError(GuidenetError, ArithmeticError):
    exit_code = 3


class NumericAbortError(NumericError):
    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"Non-finite loss {loss!r} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


# --- ARTIFACTS ---
class ArtifactFormatError(GuidenetError):
    exit_code = 4


class ImageFormatError(ArtifactFormatError):
    pass


class CheckpointFormatError(ArtifactFormatError):
    pass


# --- MANIFESTS ---
class ManifestError(GuidenetError):
    exit_code = 2


class ManifestParseError(ManifestError):
    def __init__(self, path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.line_no = line_no


class DuplicateRecordError(ManifestError):
    def __init__(self, record_id: str):
        super().__init__(f"Duplicate record id '{record_id}'")
        self.record_id = record_id


class ReferentialError(ManifestError):
    def __init__(self, missing_ids: list[str]):
        preview = ", ".join(missing_ids[:10])
        more = f" (+{len(missing_ids) - 10} more)" if len(missing_ids) > 10 else ""
        super().__init__(f"Image files missing for ids: {preview}{more}")
        self.missing_ids = missing_ids


class GradCheckFailure(GuidenetError):
    exit_code = 1

    def __init__(self, offenders: list[str]):
        super().__init__("Gradient check failed for: " + ", ".join(offenders))
        self.offenders = offenders
