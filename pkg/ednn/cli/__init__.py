"""Command-line surface: ednn generate | train | eval | count | localize."""
from ednn.cli.main import build_parser, main, resolve_settings

__all__ = ["build_parser", "main", "resolve_settings"]
