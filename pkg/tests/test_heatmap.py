"""SVG heatmap rendering: determinism, normalization, label structure."""

import pytest

from commtrace.decompose import Decomposition, PairTransfer, decompose_allreduce_ring
from commtrace.events import HOST, gpu
from commtrace.heatmap import (
    DEFAULT_STOPS,
    LINEAR,
    RenderSpec,
    render_heatmap,
    _lerp_color,
)
from commtrace.matrix import CommMatrix, accumulate

from conftest import make_instance

ZERO_FILL = "rgb({},{},{})".format(*DEFAULT_STOPS[0][1])
FULL_FILL = "rgb({},{},{})".format(*DEFAULT_STOPS[-1][1])


def test_zero_matrix_uniform_zero_color():
    svg = render_heatmap(CommMatrix(3))
    assert svg.count(ZERO_FILL) == 16  # every cell of the 4x4 grid
    assert FULL_FILL not in svg


def test_single_cell_full_intensity():
    m = CommMatrix(2)
    accumulate(m, Decomposition((PairTransfer(HOST, gpu(0), 10**6),), {}, {}))
    svg = render_heatmap(m)
    assert svg.count(FULL_FILL) == 1
    assert svg.count(ZERO_FILL) == 8


def test_ring_matrix_four_colored_cells():
    m = CommMatrix(4)
    accumulate(m, decompose_allreduce_ring(make_instance(n=4, count=4096)))
    svg = render_heatmap(m)
    assert svg.count(FULL_FILL) == 4  # equal cells all sit at the max
    assert svg.count(ZERO_FILL) == 25 - 4


def test_deterministic_bytes():
    m = CommMatrix(4)
    accumulate(m, decompose_allreduce_ring(make_instance(n=4, count=12345)))
    assert render_heatmap(m) == render_heatmap(m)


def test_axis_labels_and_net_column():
    m = CommMatrix(2)
    svg = render_heatmap(m)
    assert ">0<" in svg and ">1<" in svg and ">2<" in svg
    assert ">net<" not in svg
    m.widen()
    assert ">net<" in render_heatmap(m)


def test_linear_vs_log_scale():
    m = CommMatrix(1)
    accumulate(m, Decomposition((
        PairTransfer(HOST, gpu(0), 10),
        PairTransfer(gpu(0), HOST, 1000),
    ), {}, {}))
    log_svg = render_heatmap(m)
    lin_svg = render_heatmap(m, RenderSpec(scale=LINEAR))
    assert log_svg != lin_svg
    # log compresses the ratio: the small cell is far from the zero stop
    assert log_svg.count(ZERO_FILL) == lin_svg.count(ZERO_FILL) == 2


def test_spec_validation():
    with pytest.raises(ValueError):
        RenderSpec(scale="sqrt").validate()
    with pytest.raises(ValueError):
        RenderSpec(stops=((0.0, (0, 0, 0)), (0.5, (1, 1, 1)))).validate()
    with pytest.raises(ValueError):
        RenderSpec(cell_px=1).validate()


def test_color_interpolation_endpoints():
    assert _lerp_color(DEFAULT_STOPS, 0.0) == DEFAULT_STOPS[0][1]
    assert _lerp_color(DEFAULT_STOPS, 1.0) == DEFAULT_STOPS[-1][1]
    assert _lerp_color(DEFAULT_STOPS, 0.25) == DEFAULT_STOPS[1][1]
