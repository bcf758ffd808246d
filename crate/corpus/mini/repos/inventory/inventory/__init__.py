"""In-memory stock tracking."""

from inventory.store import Store

__all__ = ["Store"]
