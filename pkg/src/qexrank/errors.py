"""
Exception hierarchy.

Every hard failure derives from :class:`QexrankError`, which is itself a
``ValueError`` so the CLI dispatcher reports it as a one-line message and
exits 1 instead of dumping a traceback. Soft failures (a KB lookup that
times out, a malformed embedding line) never raise; they are logged and
counted in the relevant report object.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Union


class QexrankError(ValueError):
    """Base class for all qexrank hard errors."""


class AnalysisError(QexrankError):
    """Analyzer configuration could not be built."""


class IndexBuildError(QexrankError):
    """Index construction or persistence failed."""


class UnknownDocumentError(QexrankError):
    """A doc_id was looked up that the index does not contain."""

    def __init__(self, doc_id: str):
        super().__init__(f"Unknown document id: {doc_id!r}")
        self.doc_id = doc_id


class IngestionError(QexrankError):
    """A resource file was rejected.

    The message always names the file and, when known, the offending line
    number or record so the user can go straight to it.
    """

    def __init__(
        self,
        message: str,
        path: Optional[Union[str, Path]] = None,
        line: Optional[int] = None,
        record: Optional[str] = None,
    ):
        location = ""
        if path is not None:
            location = str(path)
            if line is not None:
                location += f":{line}"
            location += ": "
        if record is not None:
            message = f"{message} (record {record!r})"
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line
        self.record = record


class ExpansionError(QexrankError):
    """Query expansion was asked for something it cannot do."""


class EvaluationError(QexrankError):
    """Evaluation inputs are inconsistent (unlabeled docs, empty splits...)."""


class ConfigError(QexrankError):
    """Bad configuration value, flag, or usage."""


class OfflineError(QexrankError):
    """A network operation was requested while running offline."""


class KbFetchError(QexrankError):
    """A live knowledge-base request failed. Caught by the cached client."""
