"""Identifier case conversions."""


def snake_to_camel(name):
    """Convert snake_case to camelCase."""
    parts = [p for p in name.split("_") if p]
    if not parts:
        return ""
    return "".join(p.title() for p in parts)


def camel_to_snake(name):
    """Convert camelCase to snake_case."""
    out = []
    for ch in name:
        if ch.isupper() and out:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)
