"""Small arithmetic helpers."""

from calc.core import add, div, mul, sub

__all__ = ["add", "sub", "mul", "div"]
