import math
import random
import logging
import pytest
import numpy as np
from models.model import Model, State2, State3
from models.exprfn import ExpressionRate
from models.scenarios import build_constant
from models.equilibria import analyze_model, disease_free_equilibrium, Stability
from models.simulate import (
    IntegrationOptions, Trajectory, BasinMap, integrate, rk4_step, rkf45_step, check_invariance,
    detect_limit, periodicity_probe, basin_points, basin_map, integrate_batch, classify_endpoints,
    write_trajectory_csv, read_trajectory_csv, write_basin_csv, read_basin_csv,
)
from helpers.errors import ValidationError, StepUnderflowError, InvarianceViolation


@pytest.fixture
def circle():
    """Synthetic closed orbit around (0.3, 0.3), traversed twice."""
    times = np.linspace(0.0, 4 * math.pi, 2001)
    states = np.column_stack([0.3 + 0.1 * np.cos(times), 0.3 + 0.1 * np.sin(times)])
    return Trajectory(times=times, states=states, method='synthetic')


@pytest.fixture(scope="module")
def constant_analysis(constant_model):
    return analyze_model(constant_model)


# Steppers

def test_rk4_step_on_linear_decay():
    h = 0.1
    (y,) = rk4_step(lambda y: (-y[0],), (1.0,), h)
    assert y == pytest.approx(1 - h + h ** 2 / 2 - h ** 3 / 6 + h ** 4 / 24, abs=1e-15)


def test_rk4_step_on_arrays():
    y = rk4_step(lambda y: (-y[0], 2 * y[1]), (np.ones(3), np.ones(3)), 0.01)
    assert y[0].shape == (3,)
    assert np.all(y[0] < 1.0) and np.all(y[1] > 1.0)


def test_rkf45_step_error_estimate_is_small():
    y, err = rkf45_step(lambda y: (-y[0],), (1.0,), 0.1)
    assert y[0] == pytest.approx(math.exp(-0.1), abs=1e-7)
    assert 0.0 <= err[0] < 1e-6


# Options and validation

@pytest.mark.parametrize("kwargs", [
    {"method": "euler"},
    {"step": 0.0},
    {"step": math.inf},
    {"stride": 0},
    {"stride": 1.5},
])
def test_options_validation(kwargs):
    with pytest.raises(ValidationError):
        IntegrationOptions(**kwargs)


def test_integrate_rejects_bad_inputs(example2_model):
    with pytest.raises(ValidationError):
        integrate(example2_model, (0.1, 0.2), 0.0)
    with pytest.raises(ValidationError):
        integrate(example2_model, (0.6, 0.6), 1.0)
    with pytest.raises(ValidationError):
        integrate(example2_model, (0.1, 0.2, 0.3, 0.4), 1.0)
    with pytest.raises(ValidationError):
        integrate(example2_model, State3(0.5, 0.5, 0.5), 1.0)


# Trajectories

def test_equilibrium_is_a_fixed_point(constant_model):
    traj = integrate(constant_model, State2(0.1, 0.4), 10.0, IntegrationOptions(step=1e-2))
    assert np.max(np.abs(traj.states - [0.1, 0.4])) < 1e-12


def test_disease_free_axis_decays_exponentially(example2_model):
    traj = integrate(example2_model, (0.0, 0.5), 5.0)
    assert traj.times[-1] == pytest.approx(5.0)
    assert np.all(traj.states[:, 0] == 0.0)
    assert traj.final[1] == pytest.approx(0.5 * math.exp(-5.0), abs=1e-8)


def test_full_system_conserves_population(example1_model):
    traj = integrate(example1_model, State3(0.6, 0.1, 0.3), 20.0, IntegrationOptions(step=1e-2))
    assert traj.dims == 3
    assert traj.columns == ('tau', 'S', 'I', 'R')
    assert np.max(np.abs(traj.states.sum(axis=1) - 1.0)) <= 1e-9


def test_two_and_three_dimensional_runs_agree(example2_model):
    opts = IntegrationOptions(step=1e-2)
    reduced = integrate(example2_model, (0.1, 0.2), 20.0, opts)
    full = integrate(example2_model, (0.7, 0.1, 0.2), 20.0, opts)
    assert np.array_equal(reduced.times, full.times)
    assert np.max(np.abs(reduced.states - full.reduced)) <= 1e-7


def test_rk4_is_fourth_order(example2_model):
    reference = integrate(example2_model, (0.2, 0.1), 5.0,
                          IntegrationOptions(method='rkf45', step=1e-3, atol=1e-13, rtol=1e-13)).final
    coarse = integrate(example2_model, (0.2, 0.1), 5.0, IntegrationOptions(step=0.05)).final
    fine = integrate(example2_model, (0.2, 0.1), 5.0, IntegrationOptions(step=0.025)).final
    ratio = np.max(np.abs(coarse - reference)) / np.max(np.abs(fine - reference))
    assert ratio >= 12


def test_rkf45_reaches_t_end(example2_model):
    traj = integrate(example2_model, (0.2, 0.1), 3.0, IntegrationOptions(method='rkf45', step=0.1))
    assert traj.times[-1] == 3.0
    assert np.all(np.diff(traj.times) > 0)
    assert traj.method == 'rkf45'


def test_rkf45_absorbs_remainder_below_min_step(constant_model):
    # from the endemic point every step is accepted; 0.95 leaves 0.05 < min_step
    opts = IntegrationOptions(method='rkf45', step=0.95, min_step=0.1)
    traj = integrate(constant_model, (0.1, 0.4), 1.0, opts)
    assert traj.times.tolist() == [0.0, 1.0]
    assert traj.final == pytest.approx([0.1, 0.4], abs=1e-9)


def test_rkf45_step_underflow(example2_model, caplog):
    opts = IntegrationOptions(method='rkf45', step=1e-3, atol=1e-30, rtol=1e-30, min_step=1e-4)
    with caplog.at_level(logging.ERROR):
        with pytest.raises(StepUnderflowError):
            integrate(example2_model, (0.2, 0.1), 1.0, opts)
    assert "Integration failed" in caplog.text


def test_stride_keeps_last_state(example2_model):
    traj = integrate(example2_model, (0.2, 0.1), 1.0, IntegrationOptions(step=0.1, stride=3))
    assert traj.times.tolist() == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])


def test_remainder_step_lands_on_t_end(example2_model):
    traj = integrate(example2_model, (0.2, 0.1), 0.25, IntegrationOptions(step=0.1))
    assert traj.times.tolist() == pytest.approx([0.0, 0.1, 0.2, 0.25])
    assert traj.times[-1] == 0.25


def test_integrate_reports_convergence(constant_model, constant_analysis):
    traj = integrate(constant_model, (0.05, 0.3), 60.0, IntegrationOptions(step=1e-2),
                     equilibria=constant_analysis.equilibria)
    assert traj.status == 'converged'
    assert traj.limit_id == 'E1'


def test_integrate_without_convergence(constant_model, constant_analysis):
    traj = integrate(constant_model, (0.05, 0.3), 1.0, equilibria=constant_analysis.equilibria)
    assert traj.status == 'reached_t_end'
    assert traj.limit_id is None


# Limits

def test_detect_limit_disease_free(example2_model, example2_analysis):
    traj = integrate(example2_model, (0.0, 0.9), 30.0, IntegrationOptions(step=1e-2))
    assert detect_limit(traj, example2_analysis.equilibria) == 'DF'


def test_detect_limit_needs_model(example2_analysis):
    traj = Trajectory(times=np.array([0.0]), states=np.array([[0.0, 0.0]]))
    assert detect_limit(traj, example2_analysis.equilibria) is None
    assert detect_limit(traj, [], model=example2_analysis.model) is None
    assert detect_limit(traj, example2_analysis.equilibria, model=example2_analysis.model) == 'DF'


def test_detect_limit_requires_small_field(example2_model, example2_analysis):
    e = example2_analysis.search[0]
    traj = Trajectory(times=np.array([0.0]), states=np.array([[e.I + 5e-7, e.R]]), model=example2_model)
    # inside the radius, but the field there is far from zero
    assert detect_limit(traj, example2_analysis.equilibria) is None
    assert detect_limit(traj, example2_analysis.equilibria, field_tol=1.0) == 'E1'


def test_example2_random_starts_converge(example2_model, example2_analysis):
    rng = random.Random(19)
    points = []
    for _ in range(20):
        I = rng.uniform(0.01, 0.5)
        points.append((I, rng.uniform(0.0, 1.0 - I)))
    final = integrate_batch(example2_model, points, 200.0, 1e-2)
    assert classify_endpoints(example2_model, final, example2_analysis.equilibria) == ['E1'] * 20


# Periodicity

def test_periodicity_on_closed_orbit(circle):
    finding = periodicity_probe(circle)
    assert finding.periodic
    assert finding.t_first == 0.0
    assert finding.t_return == pytest.approx(2 * math.pi, abs=1e-2)
    assert finding.excursion == pytest.approx(0.2, abs=1e-3)


def test_periodicity_ignores_small_excursions(circle):
    assert not periodicity_probe(circle, excursion=0.5).periodic


def test_periodicity_downsamples(circle):
    assert periodicity_probe(circle, max_points=1001).periodic


def test_no_cycle_for_example2(example2_model, example2_analysis):
    traj = integrate(example2_model, (0.2, 0.1), 100.0, IntegrationOptions(step=1e-2))
    assert not periodicity_probe(traj, example2_analysis.equilibria).periodic
    assert not periodicity_probe(traj).periodic


@pytest.mark.slow
def test_no_cycle_for_example1(example1_model, example1_analysis):
    traj = integrate(example1_model, (0.1, 0.3), 300.0, IntegrationOptions(step=1e-2))
    assert not periodicity_probe(traj, example1_analysis.equilibria).periodic


# Invariance

def test_check_invariance():
    check_invariance(np.array([0.0]), np.array([[0.5, 0.5 + 1e-12]]))
    with pytest.raises(InvarianceViolation, match="tau=1.5"):
        check_invariance(np.array([0.0, 1.5]), np.array([[0.5, 0.4], [0.5, 0.6]]))
    with pytest.raises(InvarianceViolation):
        check_invariance(np.array([0.0]), np.array([[0.5, 0.6, 0.1]]))
    with pytest.raises(InvarianceViolation):
        check_invariance(np.array([0.0]), np.array([[math.nan, 0.1]]))


def test_integrate_surfaces_invariance_violation(example2_model, monkeypatch):
    def leave_simplex(fun, y, t_end, opts):
        return [0.0, t_end], [y, (0.9, 0.9)]

    monkeypatch.setattr("models.simulate._rk4", leave_simplex)
    with pytest.raises(InvarianceViolation):
        integrate(example2_model, (0.2, 0.1), 1.0)


# Basins

def test_basin_points():
    assert basin_points(3) == [(0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 0.0), (0.5, 0.5), (1.0, 0.0)]
    assert len(basin_points(20)) == 210
    with pytest.raises(ValidationError):
        basin_points(1)


def test_basin_map_counts():
    basin = BasinMap(n=2, t_end=1.0, step=0.1, cells=[(0, 0, 'DF'), (0, 1, 'E1'), (1, 0, 'unresolved')])
    assert basin.counts == {'DF': 1, 'E1': 1, 'unresolved': 1}
    assert basin.unresolved == 1
    assert basin.resolved_fraction == pytest.approx(2 / 3)
    assert BasinMap(n=2, t_end=1.0, step=0.1, cells=[]).resolved_fraction == 0.0


def test_example2_basin(example2_model, example2_analysis):
    basin = basin_map(example2_model, example2_analysis, 20, t_end=200.0)
    assert len(basin.cells) == 210
    for I, R, outcome in basin.cells:
        assert outcome == ('DF' if I == 0.0 else 'E1'), (I, R)
    assert basin.counts == {'DF': 20, 'E1': 190}


def test_basin_split_matches_single_chunk(example2_model, example2_analysis, monkeypatch):
    single = basin_map(example2_model, example2_analysis, 10, t_end=5.0, workers=1)
    monkeypatch.setattr("models.simulate.MIN_CHUNK", 10)
    split = basin_map(example2_model, example2_analysis, 10, t_end=5.0, workers=4)
    assert split.cells == single.cells


def test_basin_rejects_other_model(example1_model, example2_analysis):
    with pytest.raises(ValidationError):
        basin_map(example1_model, example2_analysis, 5)


def test_basin_failed_cells_stay_local(caplog):
    # f = 800 is too stiff for step 1e-2 away from the I = 0 edge
    m = build_constant(800.0, 5.0)
    with caplog.at_level(logging.WARNING):
        basin = basin_map(m, analyze_model(m), 10, t_end=20.0, step=1e-2, workers=1)
    edge = [outcome for I, _, outcome in basin.cells if I == 0.0]
    assert edge == ['DF'] * 10
    assert 0 < basin.unresolved < len(basin.cells)
    assert "failed to integrate" in caplog.text


def test_integrate_batch_retires_cells_outside_domain():
    m = Model(5.0, ExpressionRate.from_text("10*sqrt(0.95 - R)"))
    final = integrate_batch(m, [(0.0, 0.5), (0.0, 0.99)], 20.0, 1e-2)
    assert np.all(np.isfinite(final[0]))
    assert np.all(np.isnan(final[1]))
    assert classify_endpoints(m, final, [disease_free_equilibrium(m)]) == ['DF', 'unresolved']


@pytest.mark.slow
def test_example1_basin(example1_model, example1_analysis):
    basin = basin_map(example1_model, example1_analysis, 50, t_end=300.0)
    assert basin.resolved_fraction >= 0.95
    stable = {e.id for e in example1_analysis.equilibria if e.classification is Stability.STABLE}
    for _, _, outcome in basin.cells:
        assert outcome in stable or outcome == 'unresolved'


# CSV files

def test_trajectory_csv(example2_model, tmp_path):
    traj = integrate(example2_model, (0.2, 0.1), 1.0, IntegrationOptions(step=0.1))
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    assert path.read_text(encoding="utf-8").splitlines()[0] == "tau,I,R"
    loaded = read_trajectory_csv(path)
    assert np.array_equal(loaded.times, traj.times)
    assert np.array_equal(loaded.states, traj.states)
    assert loaded.method == 'csv' and loaded.model is None


def test_trajectory_csv_rejects_other_files(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        read_trajectory_csv(path)


def test_basin_csv(tmp_path):
    basin = BasinMap(n=2, t_end=1.0, step=0.1, cells=[(0.0, 0.0, 'DF'), (0.0, 1.0, 'DF'), (1.0, 0.0, 'E1')])
    path = tmp_path / "basin.csv"
    write_basin_csv(basin, path)
    assert path.read_text(encoding="utf-8").splitlines()[0] == "I0,R0,outcome_id"
    assert read_basin_csv(path) == basin.cells
