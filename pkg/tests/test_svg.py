import xml.etree.ElementTree as ET

import numpy as np
import pytest

from flowbench.dist_stats import boxplot_summary, ecdf
from flowbench.embed import pca_2d
from flowbench.metrics import DistanceMatrix, reference_scatter
from flowbench.report.svg import (
    Axis,
    RenderError,
    ecdf_step_points,
    fmt_value,
    palette,
    render_boxplots,
    render_ecdfs,
    render_embedding,
    render_heatmap,
    render_scatter,
)

NS = {"s": "http://www.w3.org/2000/svg"}


def _parse(svg):
    return ET.fromstring(svg)


@pytest.fixture
def matrix():
    e = np.array([[0, 0.123, 0.5], [0.123, 0, 0.987654], [0.5, 0.987654, 0]])
    return DistanceMatrix(("UQ", "ISP", "lab <x>"), e, "averaged")


def test_fmt_value():
    assert fmt_value(0.12345) == "0.12"
    assert fmt_value(0.125) == "0.12"  # round half to even
    assert fmt_value(1.0) == "1.00"


def test_axis_log_and_linear():
    a = Axis.fit([1, 1000], 0, 100, log=True, pad=0)
    assert a(1) == pytest.approx(0) and a(1000) == pytest.approx(100)
    assert a.invert(a(31.6)) == pytest.approx(31.6)
    lin = Axis.fit([2, 8], 0, 100, include_zero=True, pad=0)
    assert lin.lo == 0
    assert all(lin.lo <= t <= lin.hi for t in lin.ticks())


def test_heatmap_annotations(matrix):
    root = _parse(render_heatmap(matrix))
    values = [t.text for t in root.iter("{http://www.w3.org/2000/svg}text") if t.get("class") == "value"]
    assert values == [fmt_value(v) for v in matrix.entries.ravel()]
    assert len(root.findall(".//s:rect[@class='cell']", NS)) == 9
    labels = [t.text for t in root.findall(".//s:text[@class='row-label']", NS)]
    assert labels == list(matrix.labels)


def test_boxplots_encode_summaries():
    rng = np.random.default_rng(0)
    sums = {"a": boxplot_summary(rng.lognormal(size=100)), "b": boxplot_summary(rng.lognormal(2, size=100))}
    root = _parse(render_boxplots("flow_duration", sums, unit="ms", log=True, kinds={"a": "real_world"}))
    boxes = root.findall(".//s:g[@class='box']", NS)
    assert [b.get("data-dataset") for b in boxes] == ["a", "b"]
    assert float(boxes[1].get("data-q3")) == sums["b"].q3
    with pytest.raises(RenderError):
        render_boxplots("x", {})


def test_ecdf_paths():
    d1, d2 = ecdf([0, 1, 2, 2]), ecdf([5, 10])
    assert ecdf_step_points(d1) == [(0.0, 0.25), (1.0, 0.5), (2.0, 1.0)]
    root = _parse(render_ecdfs("flow_size_bytes", {"x": d1, "y": d2}, log_x=True))
    paths = root.findall(".//s:path[@class='ecdf']", NS)
    assert [p.get("data-dataset") for p in paths] == ["x", "y"]
    assert paths[0].get("d").startswith("M")


def test_scatter_points(matrix):
    sc = reference_scatter(matrix, "UQ", "ISP")
    root = _parse(render_scatter(sc, kinds={"UQ": "real_world", "ISP": "real_world", "lab <x>": "synthetic"}))
    pts = {c.get("data-dataset"): (float(c.get("data-x")), float(c.get("data-y")))
           for c in root.findall(".//s:circle[@class='point']", NS)}
    assert pts == sc.points


def test_embedding_render():
    X = np.random.default_rng(1).normal(size=(30, 3))
    r = pca_2d(X, ["a"] * 15 + ["b"] * 15)
    root = _parse(render_embedding(r))
    assert len(root.findall(".//s:g[@class='series']", NS)) == 2


def test_palette_groups_by_kind():
    p = palette(["r1", "s1", "r2"], {"r1": "real_world", "r2": "real_world", "s1": "synthetic"})
    assert len(set(p.values())) == 3


def test_output_is_deterministic(matrix):
    assert render_heatmap(matrix) == render_heatmap(matrix)


def test_zero_matrix_annotations():
    m = DistanceMatrix(("a", "b"), np.zeros((2, 2)), "x")
    root = _parse(render_heatmap(m))
    assert [t.text for t in root.findall(".//s:text[@class='value']", NS)] == ["0.00"] * 4


def test_ecdf_staircase_corners():
    assert ecdf_step_points(ecdf([1, 2, 2, 4])) == [(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]


def test_references_sit_on_axes():
    e = np.array([[0, 0.4, 0.9], [0.4, 0, 0.8], [0.9, 0.8, 0]])
    sc = reference_scatter(DistanceMatrix(("r1", "r2", "s"), e, "avg"), "r1", "r2")
    root = _parse(render_scatter(sc))
    circles = {c.get("data-dataset"): c for c in root.findall(".//s:circle[@class='point']", NS)}
    y_axis = root.findall(".//s:line", NS)[1]  # vertical axis line drawn after the baseline
    x_axis = root.findall(".//s:line", NS)[0]
    assert float(circles["r1"].get("cx")) == pytest.approx(float(y_axis.get("x1")))
    assert float(circles["r2"].get("cy")) == pytest.approx(float(x_axis.get("y1")))
