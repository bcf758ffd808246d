import pytest

from flaky.stats import mean, variance


def test_mean_integers():
    assert mean([2, 4, 6]) == 4


def test_mean_empty_raises():
    with pytest.raises(ValueError):
        mean([])


def test_variance_single_value():
    assert variance([5, 5, 5]) == 0


def test_variance_mixed_signs():
    # Wrong expectation committed long ago; fails on every checkout.
    assert variance([-1, 1]) == 2
