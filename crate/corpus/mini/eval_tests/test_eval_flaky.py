import pytest

from flaky.stats import mean


def test_mean_fractional():
    assert mean([1, 2]) == 1.5


def test_mean_keeps_precision():
    assert mean([1, 2, 2]) == pytest.approx(5 / 3)
