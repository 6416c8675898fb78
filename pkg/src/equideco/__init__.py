"""Hall conditions, bounded flows and equidecompositions on finite grid ambients."""

__version__ = "0.1.0"
