# errors.py
"""Exception hierarchy shared by every service.

Each error carries a short ``category`` so the CLI can print a single
machine-parsable line (``error: <category>: <message>``).
"""


class ToolkitError(Exception):
    category = "toolkit"


class SignalError(ToolkitError):
    category = "signal"


class DataError(ToolkitError):
    category = "data"


class WavFormatError(DataError):
    category = "wav_format"


class ModelError(ToolkitError):
    category = "model"


class CheckpointError(ToolkitError):
    category = "checkpoint"


class AttackError(ToolkitError):
    category = "attack"


class EvaluationError(ToolkitError):
    category = "eval"


class ConfigError(ToolkitError):
    category = "config"


class MissingArtifactError(ToolkitError):
    category = "missing_artifact"

    def __init__(self, path, command: str):
        self.path = str(path)
        self.command = command
        super().__init__(f"{self.path} not found; run `{command}` first")


class HashMismatchError(ToolkitError):
    category = "hash_mismatch"
