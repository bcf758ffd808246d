"""Renders widget labels."""


def render(name, width):
    """Pad a label to the given width."""
    label = "[" + name + "]"
    return label.center(width)
