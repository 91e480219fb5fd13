import logging
import os
from pathlib import Path
from typing import Any, Mapping, Sequence

_LEVEL_ENV = "HECKE_TRACE_LOG_LEVEL"


class RelPathFilter(logging.Filter):
    """Rewrite path arguments of a log record relative to the project root.

    Slice, representation and order-config paths show up in most pipeline
    messages; printing them relative keeps CLI logs short and diffable.
    """

    def __init__(self, project_root: Path):
        super().__init__()
        self.project_root = project_root.resolve()

    def _shorten(self, value: Any) -> Any:
        if isinstance(value, Path):
            target = value
        elif isinstance(value, str) and (os.sep in value or (os.altsep and os.altsep in value)):
            target = Path(value)
        else:
            return value

        target = target.expanduser().resolve()
        try:
            return str(target.relative_to(self.project_root))
        except ValueError:
            return str(target)

    def filter(self, record: logging.LogRecord) -> bool:
        args = record.args
        if isinstance(args, Mapping):
            record.args = {k: self._shorten(v) for k, v in args.items()}
        elif isinstance(args, Sequence) and not isinstance(args, (str, bytes)):
            record.args = tuple(self._shorten(v) for v in args)
        return True


def find_project_root_above_src() -> Path:
    here = Path(__file__).resolve()
    for parent in here.parents:
        if parent.name.lower() == "src":
            return parent.parent.resolve()
    return here.parents[-1].resolve()


def _level_from_env(default: int) -> int:
    name = os.getenv(_LEVEL_ENV)
    if not name:
        return default
    level = logging.getLevelName(name.strip().upper())
    return level if isinstance(level, int) else default


def setup_logging(level: int = logging.WARNING) -> None:
    """Attach a single stderr handler to the root logger.

    Does nothing when the root logger already has handlers, so applications
    embedding the library keep their own configuration. stdout is left to the
    CLI tables.
    """
    root = logging.getLogger()
    if root.handlers:
        return

    level = _level_from_env(level)

    handler = logging.StreamHandler()
    handler.setLevel(level)
    handler.addFilter(RelPathFilter(find_project_root_above_src()))
    handler.setFormatter(
        logging.Formatter("%(asctime)s %(levelname)-5s [%(module)s]: %(message)s", "%Y-%m-%d %H:%M:%S")
    )

    root.addHandler(handler)
    root.setLevel(level)
