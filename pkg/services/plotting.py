"""
plotting.py: Renders the f/g overlay, phase-plane trajectory fans and basin maps as SVG.
"""
import logging
import numpy as np
import matplotlib
from matplotlib.figure import Figure
from services.report import report_model
from helpers.constants import DISEASE_FREE_ID, UNRESOLVED_ID

# Marker per classification; diamonds are saddles
MARKERS = {'Saddle': 'D', 'Stable': 'o', 'Degenerate': 'x', 'Marginal': 's'}
SVG_SALT = 'sirf'


def save_svg(figure, file_path):
    """Write a figure as SVG with stable ids and no timestamp."""
    with matplotlib.rc_context({'svg.hashsalt': SVG_SALT, 'svg.fonttype': 'path'}):
        figure.savefig(file_path, format='svg', metadata={'Date': None})
    logging.info(f"Wrote SVG {file_path}")


def overlay_markers(report):
    """(R*, f(R*), marker, id) for every endemic equilibrium in a report."""
    return [(e['R'], e['f'], MARKERS[e['classification']], e['id']) for e in report['endemic']]


def report_figure(report, samples=2000):
    """
    f (dashed) and g (solid) against R with the endemic equilibria marked.

    Args:
        report (dict): A validated analysis report.
        samples (int): Points per curve.

    Returns:
        Figure: The overlay.
    """
    model = report_model(report).model
    k = model.k
    pole = model.pole
    r_f = np.linspace(0.0, 1.0, samples)
    f = model.rate(r_f).value
    # stop g short of its pole so the axis stays readable
    r_g = np.linspace(0.0, pole * (1.0 - 0.02), samples)
    g = model.g(r_g)

    figure = Figure(figsize=(8, 5))
    ax = figure.add_subplot(1, 1, 1)
    ax.plot(r_f, f, linestyle='--', color='tab:blue', label='f(R)')
    ax.plot(r_g, g, linestyle='-', color='black', label='g(R)')
    ax.axvline(pole, color='grey', linewidth=0.5, linestyle=':')

    for R, value, marker, label in overlay_markers(report):
        ax.plot([R], [value], marker=marker, linestyle='none', color='tab:red', markersize=7, label='_' + label)

    top = max(float(np.max(f)), k) * 1.5
    ax.set_ylim(min(0.0, float(np.min(f))), top)
    ax.set_xlim(0.0, 1.0)
    ax.set_xlabel('R')
    ax.set_ylabel('infection rate')
    ax.set_title(f"f and g for k = {k:g}")
    ax.legend(loc='upper left')
    figure.tight_layout()
    return figure


def trajectory_figure(trajectories, report=None):
    """
    Phase-plane fan: each trajectory drawn in the R x I plane.

    Args:
        trajectories (list): Trajectory objects (2-D or 3-D; the (I, R) projection is drawn).
        report (dict, optional): Adds the equilibria with their markers.

    Returns:
        Figure: The fan.
    """
    figure = Figure(figsize=(6, 6))
    ax = figure.add_subplot(1, 1, 1)
    ax.plot([0.0, 1.0], [1.0, 0.0], color='grey', linewidth=0.5)
    for traj in trajectories:
        I, R = traj.reduced[:, 0], traj.reduced[:, 1]
        line, = ax.plot(R, I, linewidth=1.0)
        ax.plot([R[0]], [I[0]], marker='.', color=line.get_color())

    if report is not None:
        equilibria = [report['disease_free']] + report['endemic']
        for e in equilibria:
            ax.plot([e['R']], [e['I']], marker=MARKERS[e['classification']], linestyle='none', color='tab:red')

    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel('R')
    ax.set_ylabel('I')
    ax.set_title('Phase plane')
    figure.tight_layout()
    return figure


def basin_figure(cells):
    """
    Scatter of lattice points coloured by outcome.

    Args:
        cells (list): (I0, R0, outcome_id) triples.

    Returns:
        Figure: The basin map.
    """
    figure = Figure(figsize=(6, 6))
    ax = figure.add_subplot(1, 1, 1)

    def order(outcome):
        if outcome == DISEASE_FREE_ID:
            return (0, 0)
        if outcome == UNRESOLVED_ID:
            return (2, 0)
        return (1, int(outcome[1:]))

    outcomes = sorted({outcome for _, _, outcome in cells}, key=order)
    colors = matplotlib.colormaps['tab20']
    for index, outcome in enumerate(outcomes):
        points = np.array([(I, R) for I, R, o in cells if o == outcome], dtype=float)
        color = 'lightgrey' if outcome == UNRESOLVED_ID else colors(index % 20)
        ax.scatter(points[:, 1], points[:, 0], s=8, color=color, label=outcome)

    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel('R(0)')
    ax.set_ylabel('I(0)')
    ax.set_title('Basins of attraction')
    if outcomes:
        ax.legend(loc='upper right', fontsize='small')
    figure.tight_layout()
    return figure


def plot_report(report, file_path):
    save_svg(report_figure(report), file_path)


def plot_trajectories(trajectories, file_path, report=None):
    save_svg(trajectory_figure(trajectories, report), file_path)


def plot_basin(cells, file_path):
    save_svg(basin_figure(cells), file_path)
