"""Splits expression strings into tokens."""

OPERATORS = "+-*/()"


class Token:
    """One lexical unit: a kind tag and its text."""

    def __init__(self, kind, text):
        self.kind = kind
        self.text = text

    def __repr__(self):
        return "Token({!r}, {!r})".format(self.kind, self.text)

    def __eq__(self, other):
        return (
            isinstance(other, Token)
            and self.kind == other.kind
            and self.text == other.text
        )


def tokenize(source):
    """Tokenize an arithmetic expression."""
    tokens = []
    i = 0
    while i < len(source):
        ch = source[i]
        if ch.isspace():
            i += 1
        elif ch in OPERATORS:
            tokens.append(Token("op", ch))
            i += 1
        elif ch.isdigit():
            tokens.append(Token("num", ch))
            i += 1
        else:
            raise ValueError("unexpected character: " + ch)
    return tokens
