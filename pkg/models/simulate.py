"""
simulate.py: Integrates the reduced (I, R) and full (S, I, R) systems, detects which
equilibrium a trajectory settles on, maps basins of attraction and probes for cycles.
"""
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional
import numpy as np
from models.model import State2, State3
from helpers.constants import (
    RK4_STEP, RKF45_ATOL, RKF45_RTOL, RKF45_MIN_STEP, INVARIANCE_TOL,
    CONVERGENCE_RADIUS, FIELD_NORM_TOL, BASIN_STEP, BASIN_T_END, WORKERS,
    RETURN_RADIUS, MIN_EXCURSION, UNRESOLVED_ID,
)
from helpers.errors import ValidationError, NumericError, StepUnderflowError, InvarianceViolation
from helpers.utils import write_csv, read_csv

MIN_CHUNK = 1024
COLUMNS = {2: ('tau', 'I', 'R'), 3: ('tau', 'S', 'I', 'R')}

# Fehlberg 4(5) tableau
_C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_B5 = (16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55)
_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)


@dataclass
class IntegrationOptions:
    """
    Integrator settings.

    Attributes:
        method (str): 'rk4' (fixed step) or 'rkf45' (adaptive).
        step (float): RK4 step, or the initial RKF45 step.
        atol (float), rtol (float): RKF45 tolerances.
        min_step (float): RKF45 step below which integration fails.
        stride (int): Keep every stride-th step in the output (the last state is always kept).
        invariance_tol (float): Allowed excursion outside the simplex.
    """

    method: str = 'rk4'
    step: float = RK4_STEP
    atol: float = RKF45_ATOL
    rtol: float = RKF45_RTOL
    min_step: float = RKF45_MIN_STEP
    stride: int = 1
    invariance_tol: float = INVARIANCE_TOL

    def __post_init__(self):
        if self.method not in ('rk4', 'rkf45'):
            raise ValidationError(f"Unknown integration method {self.method!r}")
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValidationError(f"step must be > 0, got {self.step}")
        if not (isinstance(self.stride, int) and self.stride >= 1):
            raise ValidationError(f"stride must be a positive integer, got {self.stride}")


@dataclass
class Trajectory:
    """
    Sampled solution of the 2-D or 3-D system.

    Attributes:
        times (ndarray): Strictly increasing tau values.
        states (ndarray): One row per time, columns (I, R) or (S, I, R).
        method (str): Integrator id.
        options (IntegrationOptions | None): Step and tolerance metadata.
        status (str): 'reached_t_end', 'converged' or 'error'.
        limit_id (str | None): Equilibrium id when converged.
        message (str): Details for the error status.
        model: The model that produced it, when known.
    """

    times: np.ndarray
    states: np.ndarray
    method: str = 'rk4'
    options: Optional[IntegrationOptions] = None
    status: str = 'reached_t_end'
    limit_id: Optional[str] = None
    message: str = ''
    model: object = field(default=None, repr=False)

    @property
    def dims(self):
        return self.states.shape[1]

    @property
    def columns(self):
        return COLUMNS[self.dims]

    @property
    def reduced(self):
        """The (I, R) projection."""
        return self.states if self.dims == 2 else self.states[:, 1:]

    @property
    def final(self):
        return self.states[-1]


def _combine(y, h, stages, weights):
    return tuple(
        yi + h * sum(w * s[i] for w, s in zip(weights, stages) if w != 0.0)
        for i, yi in enumerate(y)
    )


def rk4_step(fun, y, h):
    """One classical Runge-Kutta step; components may be floats or arrays."""
    k1 = fun(y)
    k2 = fun(tuple(yi + 0.5 * h * ki for yi, ki in zip(y, k1)))
    k3 = fun(tuple(yi + 0.5 * h * ki for yi, ki in zip(y, k2)))
    k4 = fun(tuple(yi + h * ki for yi, ki in zip(y, k3)))
    return tuple(
        yi + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
        for yi, a, b, c, d in zip(y, k1, k2, k3, k4)
    )


def rkf45_step(fun, y, h):
    """One Fehlberg step; returns the fifth-order state and the error estimate per component."""
    stages = [fun(y)]
    for row in _A[1:]:
        stages.append(fun(_combine(y, h, stages, row)))
    y5 = _combine(y, h, stages, _B5)
    y4 = _combine(y, h, stages, _B4)
    return y5, tuple(abs(a - b) for a, b in zip(y5, y4))


def _field(m, dims):
    if dims == 2:
        return lambda y: m.field_2d(y[0], y[1])
    return lambda y: m.field_3d(y[0], y[1], y[2])


def _initial(init):
    if isinstance(init, State2):
        return 2, (float(init.I), float(init.R))
    if isinstance(init, State3):
        return 3, (float(init.S), float(init.I), float(init.R))
    values = tuple(float(v) for v in init)
    if len(values) == 2:
        return _initial(State2(*values))
    if len(values) == 3:
        return _initial(State3(*values))
    raise ValidationError(f"Initial state must have 2 or 3 components, got {len(values)}")


def check_invariance(times, states, tol=INVARIANCE_TOL):
    """
    Raise InvarianceViolation if any state leaves the simplex by more than tol.

    Args:
        times (ndarray): Output times (used in the message).
        states (ndarray): Rows (I, R) or (S, I, R).
    """
    states = np.atleast_2d(states)
    if states.shape[1] == 2:
        I, R = states[:, 0], states[:, 1]
        bad = (I < -tol) | (R < -tol) | (I + R > 1.0 + tol) | ~np.isfinite(I + R)
    else:
        bad = np.any(states < -tol, axis=1) | (np.abs(states.sum(axis=1) - 1.0) > tol) | ~np.all(np.isfinite(states), axis=1)
    if np.any(bad):
        index = int(np.flatnonzero(bad)[0])
        raise InvarianceViolation(f"State {states[index].tolist()} at tau={times[index]} leaves the invariant simplex")


def _rk4(fun, y, t_end, opts):
    h = opts.step
    n_steps = max(1, int(math.floor(t_end / h + 1e-9)))
    times, states = [0.0], [y]
    for i in range(1, n_steps + 1):
        y = rk4_step(fun, y, h)
        if i % opts.stride == 0 or i == n_steps:
            times.append(i * h)
            states.append(y)
    remainder = t_end - n_steps * h
    if remainder > 1e-12 * max(1.0, t_end):
        y = rk4_step(fun, y, remainder)
        times.append(t_end)
        states.append(y)
    return times, states


def _rkf45(fun, y, t_end, opts):
    t, h = 0.0, min(opts.step, t_end)
    times, states = [0.0], [y]
    accepted = 0
    while t < t_end:
        h = min(h, t_end - t)
        if h < opts.min_step:
            raise StepUnderflowError(f"RKF45 step {h:.3e} fell below {opts.min_step:.3e} at tau={t}")
        y_new, err = rkf45_step(fun, y, h)
        scale = [opts.atol + opts.rtol * max(abs(a), abs(b)) for a, b in zip(y, y_new)]
        ratio = max(e / s for e, s in zip(err, scale))
        if not math.isfinite(ratio):
            h *= 0.25
            continue
        if ratio <= 1.0:
            # a remainder shorter than min_step is absorbed into this step
            t = t + h if t_end - (t + h) >= opts.min_step else t_end
            y = y_new
            accepted += 1
            if accepted % opts.stride == 0 or t >= t_end:
                times.append(t)
                states.append(y)
        factor = 5.0 if ratio == 0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2))
        h *= factor
    return times, states


def integrate(m, init, t_end, opts=None, equilibria=None):
    """
    Integrate the model from init to t_end.

    Args:
        m (Model): The model.
        init (State2 | State3 | sequence): Initial state; its length picks the system.
        t_end (float): Final time, > 0.
        opts (IntegrationOptions, optional): Integrator settings.
        equilibria (list, optional): Equilibria used to set the terminal status.

    Returns:
        Trajectory: Sampled solution.

    Raises:
        StepUnderflowError: RKF45 could not meet its tolerance.
        InvarianceViolation: A state left the simplex by more than the tolerance.
    """
    opts = opts or IntegrationOptions()
    if not (t_end > 0 and math.isfinite(t_end)):
        raise ValidationError(f"t_end must be > 0, got {t_end}")
    dims, y0 = _initial(init)
    (State2(*y0) if dims == 2 else State3(*y0)).validate(opts.invariance_tol)
    fun = _field(m, dims)

    stepper = _rk4 if opts.method == 'rk4' else _rkf45
    try:
        times, states = stepper(fun, y0, t_end, opts)
    except StepUnderflowError as e:
        logging.error(f"Integration failed: {e}")
        raise

    traj = Trajectory(
        times=np.asarray(times, dtype=float),
        states=np.asarray(states, dtype=float),
        method=opts.method,
        options=opts,
        model=m,
    )
    check_invariance(traj.times, traj.states, opts.invariance_tol)
    if equilibria is not None:
        traj.limit_id = detect_limit(traj, equilibria)
        if traj.limit_id is not None:
            traj.status = 'converged'
    logging.info(f"Integrated {dims}-D system with {opts.method} to tau={t_end}: {traj.status}")
    return traj


def detect_limit(traj, equilibria, radius=CONVERGENCE_RADIUS, field_tol=FIELD_NORM_TOL, model=None):
    """
    Which equilibrium, if any, the trajectory has settled on.

    Args:
        traj (Trajectory): Trajectory with a known model (or pass model=).
        equilibria (list): Equilibria of the same model.
        radius (float): Maximum distance from the equilibrium in (I, R).
        field_tol (float): Maximum vector-field norm at the last state.

    Returns:
        str | None: The nearest qualifying equilibrium id.
    """
    m = model or traj.model
    if m is None or not equilibria:
        return None
    I, R = (float(v) for v in traj.reduced[-1])
    dI, dR = m.field_2d(I, R)
    if math.hypot(dI, dR) >= field_tol:
        return None
    best = None
    for e in equilibria:
        distance = math.hypot(I - e.I, R - e.R)
        if distance < radius and (best is None or distance < best[0]):
            best = (distance, e.id)
    return best[1] if best else None


@dataclass
class PeriodicityFinding:
    """A return of the state close to an earlier state after a real excursion."""

    periodic: bool
    t_first: Optional[float] = None
    t_return: Optional[float] = None
    excursion: float = 0.0


def periodicity_probe(traj, equilibria=None, radius=RETURN_RADIUS, excursion=MIN_EXCURSION, max_points=4000):
    """
    Scan a trajectory for a closed loop.

    A finding needs a state within radius of an earlier state, an intervening
    excursion larger than excursion, and no convergence to a listed equilibrium.

    Returns:
        PeriodicityFinding: periodic=False when nothing was found.
    """
    if equilibria and detect_limit(traj, equilibria) is not None:
        return PeriodicityFinding(False)
    stride = max(1, int(math.ceil(len(traj.times) / max_points)))
    X = traj.states[::stride]
    T = traj.times[::stride]
    for j in range(2, len(X)):
        close = np.flatnonzero(np.linalg.norm(X[:j - 1] - X[j], axis=1) < radius)
        if len(close) == 0:
            continue
        i = int(close[0])
        spread = float(np.max(np.linalg.norm(X[i:j] - X[i], axis=1)))
        if spread > excursion:
            logging.warning(f"Trajectory returns near its tau={T[i]} state at tau={T[j]} after excursion {spread}")
            return PeriodicityFinding(True, float(T[i]), float(T[j]), spread)
    return PeriodicityFinding(False)


@dataclass
class BasinMap:
    """
    Outcome per lattice point of Omega.

    Attributes:
        n (int): Lattice size per axis; points are I, R in {0, 1/(n-1), ..., 1} with I + R <= 1.
        t_end (float): Integration horizon per cell.
        step (float): RK4 step.
        cells (list): (I0, R0, outcome_id) in row-major order (I outer, R inner).
    """

    n: int
    t_end: float
    step: float
    cells: List[tuple]

    @property
    def counts(self):
        tally = {}
        for _, _, outcome in self.cells:
            tally[outcome] = tally.get(outcome, 0) + 1
        return dict(sorted(tally.items()))

    @property
    def unresolved(self):
        return self.counts.get(UNRESOLVED_ID, 0)

    @property
    def resolved_fraction(self):
        return 1.0 - self.unresolved / len(self.cells) if self.cells else 0.0


def basin_points(n):
    """Lattice points of Omega, row-major in I then R."""
    if n < 2:
        raise ValidationError(f"Basin grid needs n >= 2, got {n}")
    axis = np.linspace(0.0, 1.0, n)
    return [(float(I), float(R)) for I in axis for R in axis if I + R <= 1.0 + 1e-12]


def _outside(I, R, tol):
    """Rows that left the simplex by more than tol or stopped being finite."""
    return ~np.isfinite(I + R) | (I < -tol) | (R < -tol) | (I + R > 1.0 + tol)


def _advance(fun, y, step, alive):
    """One RK4 step on the live rows; a row whose field cannot be evaluated is retired."""
    rows = np.flatnonzero(alive)
    live = tuple(c[rows] for c in y)
    try:
        moved = rk4_step(fun, live, step)
    except NumericError:
        moved = tuple(c.copy() for c in live)
        for j, row in enumerate(rows):
            try:
                cell = rk4_step(fun, tuple(c[j:j + 1] for c in live), step)
            except NumericError as e:
                logging.debug(f"Basin cell {row} stopped: {e}")
                alive[row] = False
                continue
            for c, v in zip(moved, cell):
                c[j] = v[0]
    for c, v in zip(y, moved):
        c[rows] = v


def integrate_batch(m, points, t_end, step, invariance_tol=INVARIANCE_TOL, check_every=500):
    """
    RK4 on many (I, R) initial states at once.

    A row stops advancing as soon as its field cannot be evaluated, it stops being
    finite or it leaves the simplex; the other rows carry on.

    Returns:
        ndarray: Final states, shape (len(points), 2); rows that stopped are NaN.
    """
    I = np.array([p[0] for p in points], dtype=float)
    R = np.array([p[1] for p in points], dtype=float)
    fun = _field(m, 2)
    y = (I, R)
    alive = ~_outside(I, R, invariance_tol)
    n_steps = max(1, int(math.floor(t_end / step + 1e-9)))
    with np.errstate(over='ignore', invalid='ignore'):
        for i in range(1, n_steps + 1):
            if not alive.any():
                break
            _advance(fun, y, step, alive)
            alive &= ~_outside(I, R, invariance_tol)
            if i % check_every == 0 and alive.any():
                dI, dR = fun((I[alive], R[alive]))
                if np.max(np.hypot(dI, dR)) < 1e-2 * FIELD_NORM_TOL:
                    break
    final = np.column_stack(y)
    final[~alive] = np.nan
    if not alive.all():
        logging.warning(f"{int(np.count_nonzero(~alive))} of {len(points)} basin cells failed to integrate")
    return final


def classify_endpoints(m, final, equilibria, radius=CONVERGENCE_RADIUS, field_tol=FIELD_NORM_TOL):
    """Map final states to equilibrium ids, 'unresolved' when none qualifies or the row is NaN."""
    final = np.asarray(final, dtype=float)
    finite = np.all(np.isfinite(final), axis=1)
    settled = np.zeros(len(final), dtype=bool)
    rows = np.flatnonzero(finite)
    try:
        if len(rows):
            dI, dR = m.field_2d(final[rows, 0], final[rows, 1])
            settled[rows] = np.hypot(dI, dR) < field_tol
    except NumericError:
        for row in rows:
            try:
                dI, dR = m.field_2d(final[row, 0], final[row, 1])
            except NumericError:
                continue
            settled[row] = math.hypot(dI, dR) < field_tol
    outcomes = []
    for (I, R), ok in zip(final, settled):
        outcome = UNRESOLVED_ID
        if ok:
            distances = [(math.hypot(I - e.I, R - e.R), e.id) for e in equilibria]
            distance, nearest = min(distances)
            if distance < radius:
                outcome = nearest
        outcomes.append(outcome)
    return outcomes


def basin_map(m, analysis, n, t_end=BASIN_T_END, step=BASIN_STEP, workers=WORKERS):
    """
    Integrate from every lattice point of Omega and record where it settles.

    Args:
        m (Model): The model.
        analysis (Analysis): Equilibria for the same model.
        n (int): Lattice size per axis.
        t_end (float): Horizon per cell.
        step (float): RK4 step.
        workers (int): Threads; rows are split into contiguous chunks.

    Returns:
        BasinMap: Outcomes in deterministic row-major order.
    """
    if analysis.model is not m and analysis.model.describe() != m.describe():
        raise ValidationError("The analysis was computed for a different model")
    equilibria = analysis.equilibria
    points = basin_points(n)
    # at least MIN_CHUNK points per worker
    parts = max(1, min(int(workers), -(-len(points) // MIN_CHUNK)))
    chunks = [chunk for chunk in np.array_split(np.arange(len(points)), parts) if len(chunk)]

    def run(chunk):
        final = integrate_batch(m, [points[i] for i in chunk], t_end, step)
        return classify_endpoints(m, final, equilibria)

    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        results = list(pool.map(run, chunks))

    outcomes = [outcome for chunk in results for outcome in chunk]
    cells = [(I, R, outcome) for (I, R), outcome in zip(points, outcomes)]
    basin = BasinMap(n=n, t_end=t_end, step=step, cells=cells)
    if basin.unresolved:
        logging.warning(f"{basin.unresolved} of {len(cells)} basin cells did not settle by tau={t_end}")
    logging.info(f"Basin map {n}x{n}: {basin.counts}")
    return basin


def write_trajectory_csv(traj, file_path):
    rows = ([float(t)] + [float(v) for v in state] for t, state in zip(traj.times, traj.states))
    write_csv(file_path, traj.columns, rows)


def read_trajectory_csv(file_path):
    header, rows = read_csv(file_path)
    if tuple(header) not in COLUMNS.values():
        raise ValidationError(f"{file_path} is not a trajectory CSV (header {header})")
    data = np.array([[float(v) for v in row] for row in rows], dtype=float)
    return Trajectory(times=data[:, 0], states=data[:, 1:], method='csv')


def write_basin_csv(basin, file_path):
    write_csv(file_path, ('I0', 'R0', 'outcome_id'), ([float(I), float(R), outcome] for I, R, outcome in basin.cells))


def read_basin_csv(file_path):
    header, rows = read_csv(file_path)
    if tuple(header) != ('I0', 'R0', 'outcome_id'):
        raise ValidationError(f"{file_path} is not a basin CSV (header {header})")
    return [(float(I), float(R), outcome) for I, R, outcome in rows]
