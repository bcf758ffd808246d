"""Text manipulation helpers."""

from textutils.case import camel_to_snake, snake_to_camel
from textutils.wrap import wrap

__all__ = ["camel_to_snake", "snake_to_camel", "wrap"]
