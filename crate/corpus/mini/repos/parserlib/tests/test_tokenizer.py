import pytest

from parserlib.tokenizer import Token, tokenize


def test_single_digit():
    assert tokenize("7") == [Token("num", "7")]


def test_operators():
    assert tokenize("1+2") == [
        Token("num", "1"),
        Token("op", "+"),
        Token("num", "2"),
    ]


def test_whitespace_skipped():
    assert tokenize(" 1 + 2 ") == [
        Token("num", "1"),
        Token("op", "+"),
        Token("num", "2"),
    ]


def test_unexpected_character():
    with pytest.raises(ValueError):
        tokenize("a")
