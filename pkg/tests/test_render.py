import xml.etree.ElementTree as ET
from fractions import Fraction

import pytest

from ifsresonance.boxdim import cylinders_at_scale
from ifsresonance.errors import DomainError
from ifsresonance.planar import regular_system
from ifsresonance.render import coinciding_pairs, render_planar_svg, render_product_svg, render_svg, render_tower_svg
from ifsresonance.tower import build_tree

SVG = "{http://www.w3.org/2000/svg}"


def test_resonant_product_colors(cantor_ninth, cantor_third):
    assert render_product_svg(cantor_ninth, cantor_third, 2).colored_pairs == 1
    figure = render_product_svg(cantor_ninth, cantor_third, 3)
    assert figure.shapes == 32
    assert figure.colored_pairs == 4

def test_irrational_product_plain(cantor_third, cantor_quarter):
    figure = render_product_svg(cantor_third, cantor_quarter, 3)
    assert figure.colored_pairs == 0
    assert "#d62728" not in figure.svg

def test_depth_zero(cantor_ninth, cantor_third):
    figure = render_product_svg(cantor_ninth, cantor_third, 0)
    assert figure.shapes == 1
    with pytest.raises(DomainError):
        render_product_svg(cantor_ninth, cantor_third, -1)

def test_svg_document(cantor_ninth, cantor_third):
    figure = render_product_svg(cantor_ninth, cantor_third, 3)
    assert figure.svg.startswith('<?xml version="1.0" encoding="UTF-8"?>')
    root = ET.fromstring(figure.svg)
    assert root.tag == f"{SVG}svg"
    assert root.get("viewBox") == "0 0 1000 1000"
    # the outline rectangle is not a shape
    assert len(root.findall(f"{SVG}rect")) == figure.shapes + 1
    assert render_product_svg(cantor_ninth, cantor_third, 3).svg == figure.svg

def test_coinciding_pairs(cantor_ninth, cantor_third):
    delta = Fraction(1, 9)
    groups = coinciding_pairs(cylinders_at_scale(cantor_ninth, delta), cylinders_at_scale(cantor_third, delta))
    # I(0)×I'(3) and I(1)×I'(0) both project to [8/9, 10/9]
    assert groups == [[(0, 3), (1, 0)]]

def test_planar_figure():
    figure = render_planar_svg(regular_system(3, 0.3), 2)
    assert figure.shapes == 9
    assert len(ET.fromstring(figure.svg).findall(f"{SVG}circle")) == 9

def test_render_dispatch(cantor_ninth, cantor_third):
    assert render_svg(regular_system(3, 0.3), 2).svg == render_planar_svg(regular_system(3, 0.3), 2).svg
    assert render_svg((cantor_ninth, cantor_third), 2) == render_product_svg(cantor_ninth, cantor_third, 2)

def test_tower_figure(cantor_quarter, cantor_third):
    levels, _ = build_tree(cantor_quarter, cantor_third, 0, 1, 0.1, 2, scale_steps=64)
    figure = render_tower_svg(levels)
    assert figure.shapes >= len(levels)
    with pytest.raises(DomainError):
        render_tower_svg([])
