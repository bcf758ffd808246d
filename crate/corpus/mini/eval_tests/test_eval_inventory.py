import pytest

from inventory.store import Store


def test_remove_beyond_stock_raises():
    s = Store()
    s.add_item("bolt", 1)
    with pytest.raises(ValueError):
        s.remove_item("bolt", 2)


def test_failed_remove_leaves_stock_intact():
    s = Store()
    s.add_item("bolt", 1)
    try:
        s.remove_item("bolt", 5)
    except ValueError:
        pass
    assert s.quantity("bolt") == 1
