import pytest
from models.equilibria import analyze_model
from models.simulate import integrate, IntegrationOptions, basin_points
from services.report import parse_model_spec, build_report
from services.plotting import (
    MARKERS, overlay_markers, report_figure, trajectory_figure, basin_figure,
    plot_report, plot_trajectories, plot_basin,
)


def make_report(data):
    spec = parse_model_spec(data)
    return build_report(analyze_model(spec.model), spec)


@pytest.fixture(scope="module")
def example1_report():
    return make_report({"k": 5, "f": {"kind": "example1", "n": 5}})


@pytest.fixture(scope="module")
def example2_report():
    return make_report({"f": {"kind": "example2", "k": 5}})


@pytest.fixture(scope="module")
def low_report():
    return make_report({"k": 5, "f": {"kind": "constant", "beta_tilde": 4}})


# Overlay markers

def test_example1_markers_alternate(example1_report):
    markers = overlay_markers(example1_report)
    assert len(markers) == 10
    assert [m for _, _, m, _ in markers] == ['D', 'o'] * 5
    assert [label for _, _, _, label in markers] == [f"E{i}" for i in range(1, 11)]


def test_example2_single_stable_marker(example2_report):
    markers = overlay_markers(example2_report)
    assert len(markers) == 1
    R, value, marker, label = markers[0]
    assert marker == 'o' and label == 'E1'
    assert 0.43 < R < 0.44
    assert value == pytest.approx(5 * R ** 2 + 10)


def test_no_markers_below_threshold(low_report):
    assert overlay_markers(low_report) == []


def test_every_classification_has_a_marker():
    assert set(MARKERS) == {'Saddle', 'Stable', 'Degenerate', 'Marginal'}
    assert len(set(MARKERS.values())) == len(MARKERS)


def test_report_figure_draws_curves_and_markers(example1_report):
    figure = report_figure(example1_report, samples=200)
    ax = figure.axes[0]
    styles = [line.get_linestyle() for line in ax.get_lines()]
    assert '--' in styles and '-' in styles
    marked = [line.get_marker() for line in ax.get_lines() if line.get_marker() in ('D', 'o')]
    assert marked.count('D') == 5
    assert marked.count('o') == 5
    assert ax.get_xlim() == (0.0, 1.0)


# SVG files

def test_svg_is_byte_identical(example2_report, tmp_path):
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    plot_report(example2_report, str(first))
    plot_report(example2_report, str(second))
    assert first.read_bytes() == second.read_bytes()
    assert b"<svg" in first.read_bytes()


def test_trajectory_plot(example2_model, example2_report, tmp_path):
    opts = IntegrationOptions(step=1e-2)
    trajectories = [
        integrate(example2_model, (0.1, 0.2), 5.0, opts),
        integrate(example2_model, (0.7, 0.1, 0.2), 5.0, opts),
    ]
    figure = trajectory_figure(trajectories, example2_report)
    # boundary, two curves with their start points, two equilibria
    assert len(figure.axes[0].get_lines()) == 7
    path = tmp_path / "fan.svg"
    plot_trajectories(trajectories, str(path), example2_report)
    assert path.stat().st_size > 0


def test_basin_plot(tmp_path):
    cells = [(I, R, 'DF' if I == 0.0 else 'E1') for I, R in basin_points(5)]
    cells[-1] = (cells[-1][0], cells[-1][1], 'unresolved')
    figure = basin_figure(cells)
    labels = [text.get_text() for text in figure.axes[0].get_legend().get_texts()]
    assert labels == ['DF', 'E1', 'unresolved']
    path = tmp_path / "basin.svg"
    plot_basin(cells, str(path))
    assert path.read_bytes().startswith(b"<?xml")


def test_basin_plot_without_cells():
    figure = basin_figure([])
    assert figure.axes[0].get_legend() is None
