from garbage.widget import render


def test_render_centered():
    assert render("ok", 8) == "  [ok]  "


def test_render_exact_width():
    assert render("ok", 4) == "[ok]"
