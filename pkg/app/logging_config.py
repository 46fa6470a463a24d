import logging
import os
from typing import Literal


def init_logging(level: str | None = None) -> None:
    """Configure root logging from LOG_LEVEL/LOG_FORMAT; ``level`` overrides LOG_LEVEL."""
    level_name: str = (level or os.getenv("LOG_LEVEL", "INFO")).upper()
    resolved: int = getattr(logging, level_name, logging.INFO)

    format_style: Literal["plain", "json"] = (
        os.getenv("LOG_FORMAT", "plain").lower()  # type: ignore[assignment]
    )

    if format_style == "json":
        fmt = (
            '{"level": "%(levelname)s", '
            '"ts": "%(asctime)s", '
            '"msg": "%(message)s", '
            '"logger": "%(name)s"}'
        )
        datefmt = "%Y-%m-%dT%H:%M:%S%z"
    else:
        fmt = "[%(asctime)s] %(levelname)s %(name)s: %(message)s"
        datefmt = "%Y-%m-%d %H:%M:%S"

    logging.basicConfig(level=resolved, format=fmt, datefmt=datefmt, force=True)
