import re
import xml.etree.ElementTree as ET

from hypothesis import given
from hypothesis import strategies as st

from novikov.homology import ZoneLabel
from novikov.render import BACKGROUND, NULL_COLOR, UNRESOLVED_COLOR, label_color, render_ppm, render_svg

from .test_areas import synthetic

SVG = "{http://www.w3.org/2000/svg}"


def _cells(svg):
    root = ET.fromstring(svg.encode())
    return [p for p in root.iter(SVG + "polygon") if p.get("class") == "cell"]


def test_n1_three_cells():
    s = synthetic(1, lambda m, n: ZoneLabel.zone((0, 0, 1)) if m == 0 else ZoneLabel.zone((1, 1, 1)))
    svg = render_svg(s)
    root = ET.fromstring(svg.encode())
    assert root.get("version") == "1.1"
    assert len(_cells(svg)) == 3


def test_single_zone_single_colour_and_legend():
    s = synthetic(6, lambda m, n: ZoneLabel.zone((0, 0, 1)))
    svg = render_svg(s)
    fills = {p.get("fill") for p in _cells(svg)}
    assert len(fills) == 1
    root = ET.fromstring(svg.encode())
    entries = [r for r in root.iter(SVG + "rect") if r.get("class") == "legend-entry"]
    assert len(entries) == 1


def test_legend_capped_at_twenty():
    labels = [ZoneLabel.zone((0, k, k + 1)) for k in range(30)]
    s = synthetic(9, lambda m, n: labels[(m * 10 + n) % 30])
    root = ET.fromstring(render_svg(s).encode())
    assert len([r for r in root.iter(SVG + "rect") if r.get("class") == "legend-entry"]) == 20


def test_special_colours():
    assert label_color(ZoneLabel.null()) == NULL_COLOR == (255, 255, 255)
    assert label_color(ZoneLabel.unresolved("RankOne")) == UNRESOLVED_COLOR == (0, 0, 0)


@given(st.tuples(st.integers(0, 50), st.integers(0, 50), st.integers(1, 50)), st.integers(0, 5))
def test_zone_colours_stable_and_distinct_from_specials(l, seed):
    import math
    if math.gcd(*l) != 1:
        return
    lab = ZoneLabel.zone(l)
    c = label_color(lab, seed)
    assert c == label_color(ZoneLabel.zone(l), seed)
    assert c not in (NULL_COLOR, UNRESOLVED_COLOR)
    assert all(0 <= v <= 255 for v in c)


def test_colours_do_not_depend_on_n():
    lab = ZoneLabel.zone((1, 2, 2))
    a = synthetic(3, lambda m, n: lab)
    b = synthetic(8, lambda m, n: lab)
    fa = {p.get("fill") for p in _cells(render_svg(a))}
    fb = {p.get("fill") for p in _cells(render_svg(b))}
    assert fa == fb


def test_ppm():
    s = synthetic(4, lambda m, n: ZoneLabel.unresolved("RankOne") if m == n else ZoneLabel.null())
    data = render_ppm(s, size=64)
    m = re.match(rb"P6\n(\d+) (\d+)\n255\n", data)
    assert m and (int(m[1]), int(m[2])) == (64, 64)
    pix = data[m.end():]
    assert len(pix) == 64 * 64 * 3
    colours = {tuple(pix[i:i + 3]) for i in range(0, len(pix), 3)}
    assert colours == {NULL_COLOR, UNRESOLVED_COLOR, BACKGROUND}
    # bottom-left pixel is the (0,0,1) corner; top-left lies outside the triangle
    row = 64 * 3
    assert tuple(pix[63 * row:63 * row + 3]) == UNRESOLVED_COLOR
    assert tuple(pix[0:3]) == BACKGROUND
