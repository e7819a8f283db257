"""Conditional first-passage statistics of searchers that can be inactivated."""
from __future__ import annotations

__version__ = "0.1.0"
