from calc.core import div


def test_div_fractional():
    assert div(7, 2) == 3.5
    assert div(1, 4) == 0.25


def test_div_negative():
    assert div(-3, 2) == -1.5
