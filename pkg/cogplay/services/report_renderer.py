"""
Report renderer using Jinja2.

Renders the human-readable run summary from the tables a pipeline run (or
the individual subcommands) already wrote; nothing is recomputed here.
"""
import logging
import os
from typing import Any, Dict

from jinja2 import Environment, FileSystemLoader, StrictUndefined, TemplateError, TemplateNotFound

from ..errors import ArtifactIOError

logger = logging.getLogger(__name__)


def _fmt(value: Any, spec: str = ".3g") -> str:
    if value is None:
        return "-"
    try:
        return format(float(value), spec)
    except (TypeError, ValueError):
        return str(value)


class ReportRenderer:
    """Renders templates under templates/report/."""

    def __init__(self):
        current_dir = os.path.dirname(os.path.abspath(__file__))
        self.template_dir = os.path.join(current_dir, "..", "templates", "report")
        if not os.path.exists(self.template_dir):
            raise RuntimeError(f"Report templates directory not found: {self.template_dir}")

        self.env = Environment(
            loader=FileSystemLoader(self.template_dir),
            autoescape=False,  # markdown output
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )
        self.env.filters["fmt"] = _fmt
        logger.debug(f"ReportRenderer initialized with template directory: {self.template_dir}")

    def render(self, template_name: str, context: Dict[str, Any]) -> str:
        """
        Render a report template.

        Raises:
            ArtifactIOError: missing template or a rendering failure
        """
        try:
            logger.info(f"Rendering report template: {template_name}")
            return self.env.get_template(template_name).render(**context)
        except TemplateNotFound:
            raise ArtifactIOError(f"report template not found: {template_name}")
        except TemplateError as e:
            raise ArtifactIOError(f"cannot render {template_name}: {e}")


# Singleton instance
report_renderer = ReportRenderer()
