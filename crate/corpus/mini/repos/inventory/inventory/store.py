"""A tiny in-memory inventory store."""


class Store:
    """Tracks item quantities by name."""

    def __init__(self):
        self._counts = {}

    def add_item(self, name, count=1):
        """Add count units of an item."""
        if count < 0:
            raise ValueError("count must be non-negative")
        self._counts[name] = self._counts.get(name, 0) + count

    def remove_item(self, name, count=1):
        """Remove count units of an item."""
        if count < 0:
            raise ValueError("count must be non-negative")
        self._counts[name] = self._counts.get(name, 0) - count

    def quantity(self, name):
        """Current quantity of an item, zero when absent."""
        return self._counts.get(name, 0)

    def total(self):
        """Total units across all items."""
        return sum(self._counts.values())
