"""Tokenizer for a tiny expression language."""

from parserlib.tokenizer import Token, tokenize

__all__ = ["Token", "tokenize"]
