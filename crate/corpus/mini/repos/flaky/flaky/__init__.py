"""Toy statistics helpers."""

from flaky.stats import mean, variance

__all__ = ["mean", "variance"]
