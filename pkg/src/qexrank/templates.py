"""
Plain-text report templates.

Reports (the MAP table, the per-query view, the expansion dump) are
``.j2`` files shipped under ``_templates/`` and rendered through one
Jinja2 environment. Autoescape is OFF (the output is plain text, not
HTML) and ``StrictUndefined`` makes a missing context key fail loudly.
"""
from typing import Any, Dict

from jinja2 import Environment, PackageLoader, StrictUndefined


# Environment for file-backed templates loaded from src/qexrank/_templates/.
# ``keep_trailing_newline=True`` keeps each report newline-terminated.
_jinja_file_env = Environment(
    loader=PackageLoader("qexrank", "_templates"),
    autoescape=False,
    undefined=StrictUndefined,
    keep_trailing_newline=True,
    trim_blocks=False,
    lstrip_blocks=False,
)


class TemplateLoader:
    """Load and render ``.j2`` files shipped with the qexrank package.

    Templates are referenced by file name (``"table.txt.j2"``); packaging
    works as long as ``_templates/*.j2`` is included as package data.
    """

    @staticmethod
    def render(template_name: str, context: Dict[str, Any]) -> str:
        """Load ``_templates/<template_name>`` and render with `context`."""
        return _jinja_file_env.get_template(template_name).render(**context)
