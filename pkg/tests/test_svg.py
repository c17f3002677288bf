import xml.etree.ElementTree as ET

from smh.svg import HEIGHT, WIDTH, Series, line_plot

NS = "{http://www.w3.org/2000/svg}"


def test_plot_is_well_formed_with_fixed_canvas():
    svg = line_plot([Series("a & b", [1, 10, 100], [5, 50, 500]),
                     Series("<c>", [1, 10, 100], [1, 1, 1])],
                    "title", "n", "y", logx=True, logy=True)
    root = ET.fromstring(svg)
    assert root.tag == NS + "svg"
    assert (root.get("width"), root.get("height")) == (str(WIDTH), str(HEIGHT)) == ("800", "600")
    assert len(root.findall(NS + "polyline")) == 2
    texts = [t.text for t in root.iter(NS + "text")]
    assert "a & b" in texts and "<c>" in texts


def test_log_axes_skip_nonpositive_points():
    svg = line_plot([Series("s", [1, 10, 100], [0.0, 2.0, float("nan")])], "t", "x", "y",
                    logy=True)
    root = ET.fromstring(svg)
    assert len(root.findall(NS + "circle")) == 1
    assert root.findall(NS + "polyline") == []


def test_linear_axes_and_constant_data():
    root = ET.fromstring(line_plot([Series("s", [0.0, 0.25, 0.5], [0.9, 0.9, 0.9])], "t", "x", "y"))
    assert len(root.findall(NS + "circle")) == 3
