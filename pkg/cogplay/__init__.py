"""cogplay: gameplay telemetry logs, synthetic players and cognitive endpoint analysis."""

__version__ = "1.0.0"
