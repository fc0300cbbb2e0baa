"""
Utilities and helpers.
"""
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, List

from .errors import QexrankError

logger = logging.getLogger('qexrank')


class PathManager:
    """Manages file system operations safely"""

    @staticmethod
    def ensure_dir(path: Path) -> Path:
        """Create directory (and parents) if needed"""
        path.mkdir(parents=True, exist_ok=True)
        return path

    @staticmethod
    def atomic_write(path: Path, content: str) -> Path:
        """Write `content` to a temp file next to `path`, then rename over it.

        Readers never see a half-written index, cache or report: either the
        old file or the complete new one.
        """
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp_name = tempfile.mkstemp(
                prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent)
            )
        except OSError as e:
            raise QexrankError(f"Cannot write {path}: {e}") from e

        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
                f.write(content)
            os.replace(tmp_name, path)
        except OSError as e:
            logger.exception(e)
            try:
                os.unlink(tmp_name)
            except OSError:
                pass
            raise QexrankError(f"File I/O error writing to {path}: {e}") from e
        logger.debug(f"Wrote {path}")
        return path

    @staticmethod
    def atomic_write_lines(path: Path, lines: Iterable[str]) -> Path:
        """Atomic write of newline-terminated lines"""
        return PathManager.atomic_write(path, "".join(f"{line}\n" for line in lines))


def split_csv(value: str) -> List[str]:
    """Split a comma-separated flag value, dropping blanks."""
    return [part.strip() for part in value.split(",") if part.strip()]
