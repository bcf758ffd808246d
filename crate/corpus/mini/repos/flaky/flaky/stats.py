"""Basic descriptive statistics."""


def mean(xs):
    """Arithmetic mean of a non-empty sequence."""
    if not xs:
        raise ValueError("mean of empty sequence")
    return sum(xs) // len(xs)


def variance(xs):
    """Population variance of a non-empty sequence."""
    if not xs:
        raise ValueError("variance of empty sequence")
    m = mean(xs)
    return sum((x - m) ** 2 for x in xs) / len(xs)
