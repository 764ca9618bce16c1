"""reportgen: render fracns run-directory CSVs into figures and a report.

Strictly read-only over the run directory; every number in a figure comes
from the CSVs or params.json, never from recomputed physics.
"""

__version__ = "0.1.0"

from .render import render_report  # noqa: F401
