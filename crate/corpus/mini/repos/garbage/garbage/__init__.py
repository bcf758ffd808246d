"""Widget label rendering."""

from garbage.widget import render

__all__ = ["render"]
