import pytest

from inventory.store import Store


def test_add_and_quantity():
    s = Store()
    s.add_item("bolt", 3)
    assert s.quantity("bolt") == 3


def test_remove():
    s = Store()
    s.add_item("bolt", 3)
    s.remove_item("bolt", 2)
    assert s.quantity("bolt") == 1


def test_add_negative_rejected():
    s = Store()
    with pytest.raises(ValueError):
        s.add_item("bolt", -1)


def test_total():
    s = Store()
    s.add_item("a", 2)
    s.add_item("b", 5)
    assert s.total() == 7
