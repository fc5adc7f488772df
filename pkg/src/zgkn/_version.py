"""Single source of truth for the zgkn version."""

__version__ = "0.4.0"
