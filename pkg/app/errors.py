from __future__ import annotations

from pathlib import Path


class MinRuinError(Exception):
    """Base error for solver, simulator and file-format failures."""


class ControlFileError(MinRuinError):
    """Control file does not match the 3-line grammar."""

    def __init__(self, line: int, field: int | None, message: str) -> None:
        self.line = line
        self.field = field
        where = f"line {line}" if field is None else f"line {line}, field {field}"
        super().__init__(f"control file {where}: {message}")


class AgeTableError(MinRuinError):
    """Age-probability table is malformed or does not sum to one."""

    def __init__(self, row: int | None, message: str) -> None:
        self.row = row
        where = "age table" if row is None else f"age table row {row}"
        super().__init__(f"{where}: {message}")


class MemberAgeError(MinRuinError):
    """MPU member age lies outside the table's range for that gender."""


class StageDataError(MinRuinError):
    """Stage vector is out of range or not monotone."""

    def __init__(self, bucket: int, message: str) -> None:
        self.bucket = bucket
        super().__init__(f"bucket {bucket}: {message}")


class PolicyFileError(MinRuinError):
    """Result file cannot be parsed into a policy grid."""

    def __init__(self, path: Path | str, message: str) -> None:
        self.path = Path(path)
        super().__init__(f"{path}: {message}")


class SingularSystemError(MinRuinError):
    """Yule-Walker system has no unique solution."""

    def __init__(self, lag: int) -> None:
        self.lag = lag
        super().__init__(f"yule-walker system is singular at lag {lag}")


class ZeroVarianceError(MinRuinError):
    """Series has zero sample variance."""


class OutputDirectoryError(MinRuinError):
    """Output directory cannot be created or written."""
