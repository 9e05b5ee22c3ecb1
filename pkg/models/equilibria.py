"""
equilibria.py: Locates the equilibria of the reduced model, classifies their local
stability and issues existence, uniqueness and global-stability certificates.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional
import numpy as np
from models.model import State2, g_threshold, g_dual, jacobian_2d, eigenvalues_2x2, trace_det
from models.scenarios import classical_r0
from helpers.constants import (
    GRID_POINTS, BISECTION_TOL, RESIDUAL_TOL, TANGENCY_TOL, TIE_TOL,
    MONOTONE_GRID, POSITIVITY_GRID, RIGHT_END_EPS, DISEASE_FREE_ID,
)
from helpers.errors import ValidationError


class Stability(str, Enum):
    STABLE = 'Stable'
    SADDLE = 'Saddle'
    DEGENERATE = 'Degenerate'
    MARGINAL = 'Marginal'


class GlobalVerdict(str, Enum):
    DISEASE_FREE = 'GloballyStableDiseaseFree'
    ENDEMIC = 'GloballyStableEndemic'
    UNKNOWN = 'Unknown'


# Results a certificate can invoke, with the smoothness each one formally assumes
RESULTS = {
    'characterization': 'f positive, differentiable on [0,1]',
    'existence': 'f positive on R, differentiable on [0,1]',
    'local-stability': 'f positive, differentiable on [0,1]',
    'non-increasing-stability': 'f positive, differentiable on [0,1]',
    'successor': 'f positive, differentiable on [0,1]',
    'uniqueness': 'f positive, differentiable on [0,1]',
    'disease-free-local': 'f positive, C1 on R',
    'disease-free-global': 'f positive, C1 on R',
    'endemic-global': 'f positive, C1 on R',
}


@dataclass
class Equilibrium:
    """
    An equilibrium of the reduced model with its local diagnostics.

    Attributes:
        id (str): 'DF' for the disease-free point, 'E1', 'E2', ... by increasing R*.
        kind (str): 'disease-free' or 'endemic'.
        I (float), R (float): Location.
        classification (Stability): Local verdict.
        f (float), df (float): f(R*) and f'(R*).
        dg (float): g'(R*).
        margin (float): D = f'(R*) - f(R*)^2/(k-1); sign decides the verdict.
        eigenvalues (list): Two (real, imag) pairs of the Jacobian.
        trace (float), det (float): Jacobian trace and determinant.
        residual (float): |f(R*) - g(R*)|.
        thresholds (dict): g'(R*), g(R*)^2/(k-1) and f(R*)^2/(k-1).
    """

    id: str
    kind: str
    I: float
    R: float
    classification: Stability
    f: float
    df: float
    dg: Optional[float]
    margin: float
    eigenvalues: list
    trace: float
    det: float
    residual: float = 0.0
    thresholds: dict = field(default_factory=dict)

    @property
    def state(self):
        return State2(self.I, self.R)


@dataclass
class EndemicSearch:
    """Roots of h = f - g found on the grid, plus near-misses without a sign change."""

    equilibria: List[Equilibrium]
    tangencies: List[float]
    grid_points: int
    tol: float
    right_end: float

    def __iter__(self):
        return iter(self.equilibria)

    def __len__(self):
        return len(self.equilibria)

    def __getitem__(self, index):
        return self.equilibria[index]


@dataclass
class ExistenceCertificate:
    verdict: bool
    witness: Optional[float]
    shortcut: bool
    below_threshold: bool
    grid_points: int
    touching: List[float] = field(default_factory=list)
    result: str = 'existence'


@dataclass
class UniquenessCertificate:
    verdict: str  # 'NoEndemic', 'UniqueStable' or 'NotApplicable'
    reason: str
    monotone: bool
    constant: bool
    heuristic: bool = True
    result: str = 'uniqueness'


@dataclass
class GlobalCertificate:
    verdict: GlobalVerdict
    result: Optional[str]
    reason: str


@dataclass
class Certificates:
    existence: ExistenceCertificate
    uniqueness: UniquenessCertificate
    global_: GlobalCertificate


@dataclass
class SuccessorCheck:
    id: str
    applies: bool
    satisfied: bool
    next_id: Optional[str]
    result: str = 'successor'


@dataclass
class Analysis:
    """Everything the analyzer learns about one model."""

    model: object
    positivity: object
    disease_free: Equilibrium
    search: EndemicSearch
    certificates: Certificates
    successors: List[SuccessorCheck]
    reproduction: dict
    settings: dict

    @property
    def equilibria(self):
        return [self.disease_free] + list(self.search.equilibria)


def _h(m, r):
    return m.rate(r).value - g_threshold(r, m.k)


def _bisect(m, a, b, ha, hb, tol, residual_tol=RESIDUAL_TOL, max_iter=200):
    """Shrink a sign-change bracket; returns the end with the smaller residual."""
    for _ in range(max_iter):
        if b - a <= tol and min(abs(ha), abs(hb)) <= residual_tol:
            break
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        hm = _h(m, mid)
        if hm == 0.0:
            return mid
        if (hm < 0) == (ha < 0):
            a, ha = mid, hm
        else:
            b, hb = mid, hm
    return a if abs(ha) <= abs(hb) else b


def right_end(k):
    """Right end of the search interval, (k-1)/k - eps with eps = 1e-9 (k-1)/k."""
    pole = (k - 1.0) / k
    return pole - RIGHT_END_EPS * pole


def threshold_gap(m, grid_points):
    """Grid over [0, (k-1)/k - eps] and h = f - g on it."""
    grid = np.linspace(0.0, right_end(m.k), grid_points + 1)
    return grid, m.rate(grid).value - g_threshold(grid, m.k)


def classify_equilibrium(R, m, tie_tol=TIE_TOL):
    """
    Local stability of the endemic equilibrium at R* by the sign of f'(R*) - f(R*)^2/(k-1).

    Args:
        R (float): Location R* of an endemic equilibrium.
        m (Model): The model.
        tie_tol (float): Band around zero reported as Degenerate.

    Returns:
        Stability: STABLE, SADDLE or DEGENERATE.
    """
    rate = m.rate(R)
    margin = rate.deriv - rate.value ** 2 / (m.k - 1.0)
    if margin < -tie_tol:
        return Stability.STABLE
    if margin > tie_tol:
        return Stability.SADDLE
    return Stability.DEGENERATE


def endemic_equilibrium(R, m, index, tie_tol=TIE_TOL):
    """Build the endemic Equilibrium at R* with every diagnostic filled in."""
    k = m.k
    if not 0.0 < R < m.pole:
        raise ValidationError(f"Endemic equilibria need R* in (0, {m.pole}), got {R}")
    I = R / (k - 1.0)
    rate = m.rate(R)
    g = g_dual(R, k)
    jac = jacobian_2d(State2(I, R), m)
    trace, det = trace_det(jac)
    margin = rate.deriv - rate.value ** 2 / (k - 1.0)
    classification = classify_equilibrium(R, m, tie_tol)
    if classification is Stability.DEGENERATE:
        logging.warning(f"Endemic equilibrium at R*={R} is tangential (f' = g'); not classified")
    return Equilibrium(
        id=f"E{index}",
        kind='endemic',
        I=I,
        R=R,
        classification=classification,
        f=float(rate.value),
        df=float(rate.deriv),
        dg=float(g.deriv),
        margin=float(margin),
        eigenvalues=eigenvalues_2x2(jac),
        trace=trace,
        det=det,
        residual=abs(float(rate.value) - float(g.value)),
        thresholds={
            'dg': float(g.deriv),
            'g_squared': float(g.value) ** 2 / (k - 1.0),
            'f_squared': float(rate.value) ** 2 / (k - 1.0),
        },
    )


def find_endemic_equilibria(m, grid_points=GRID_POINTS, tol=BISECTION_TOL, tie_tol=TIE_TOL):
    """
    Find every crossing of f and g on [0, (k-1)/k) resolvable on the grid.

    Args:
        m (Model): The model.
        grid_points (int): Number of grid intervals, at least 100.
        tol (float): Bisection bracket width.
        tie_tol (float): Degenerate band for the classification.

    Returns:
        EndemicSearch: Endemic equilibria sorted by R*, and possible tangencies.
    """
    if grid_points < 100:
        raise ValidationError(f"grid_points must be at least 100, got {grid_points}")
    if not tol > 0:
        raise ValidationError(f"tol must be > 0, got {tol}")

    grid, h = threshold_gap(m, grid_points)
    roots = []
    crossing = np.zeros(len(grid), dtype=bool)

    # R = 0 is the disease-free point, never an endemic candidate
    crossing[0] = grid[0] == 0.0
    nonzero = np.flatnonzero(h != 0.0)
    for j in np.flatnonzero(h == 0.0):
        # a run of exact zeros counts once, and only if h changes sign across it
        if grid[j] == 0.0 or (j > 0 and h[j - 1] == 0.0):
            continue
        before = nonzero[nonzero < j]
        after = nonzero[nonzero > j]
        if len(before) and len(after) and h[before[-1]] * h[after[0]] < 0:
            roots.append(float(grid[j]))
            crossing[j] = True

    for j in np.flatnonzero(h[:-1] * h[1:] < 0):
        roots.append(_bisect(m, float(grid[j]), float(grid[j + 1]), float(h[j]), float(h[j + 1]), tol))
        crossing[j] = crossing[j + 1] = True

    roots = sorted(set(roots))
    near = (np.abs(h) < TANGENCY_TOL) & ~crossing
    tangencies = [float(r) for r in grid[near]]
    for r in tangencies:
        logging.warning(f"Possible tangency of f and g near R={r} (|h| < {TANGENCY_TOL}, no sign change)")

    equilibria = [endemic_equilibrium(r, m, i + 1, tie_tol) for i, r in enumerate(roots)]
    logging.info(f"Found {len(equilibria)} endemic equilibria on {grid_points} intervals")
    return EndemicSearch(equilibria, tangencies, grid_points, tol, float(grid[-1]))


def disease_free_classification(m, tie_tol=TIE_TOL):
    """
    Local stability of (0, 0) from the sign of f(0) - k.

    Returns:
        Stability: STABLE, SADDLE or MARGINAL (f(0) = k within tie_tol).
    """
    f0 = float(m.rate(0.0).value)
    if f0 < m.k - tie_tol:
        return Stability.STABLE
    if f0 > m.k + tie_tol:
        return Stability.SADDLE
    logging.warning(f"f(0) = k = {m.k}: disease-free point is marginal")
    return Stability.MARGINAL


def disease_free_equilibrium(m, tie_tol=TIE_TOL):
    rate = m.rate(0.0)
    jac = jacobian_2d(State2(0.0, 0.0), m)
    trace, det = trace_det(jac)
    return Equilibrium(
        id=DISEASE_FREE_ID,
        kind='disease-free',
        I=0.0,
        R=0.0,
        classification=disease_free_classification(m, tie_tol),
        f=float(rate.value),
        df=float(rate.deriv),
        dg=None,
        margin=float(rate.value) - m.k,
        eigenvalues=eigenvalues_2x2(jac),
        trace=trace,
        det=det,
    )


def existence_certificate(m, grid_points=GRID_POINTS):
    """
    Look for R in [0, (k-1)/k) with f(R) > g(R); f(0) > k is tried first.

    Returns:
        ExistenceCertificate: verdict, witness R, whether the f(0) > k shortcut fired,
        whether f stayed strictly below g on the whole grid, and the grid points
        where f = g exactly. A failed verdict that is not below threshold means f
        touches g at the listed points.
    """
    f0 = float(m.rate(0.0).value)
    grid, h = threshold_gap(m, grid_points)
    below = bool(np.all(h < 0))
    touching = [float(r) for r in grid[h == 0.0]]
    if f0 > m.k:
        return ExistenceCertificate(True, 0.0, True, below, grid_points, touching)
    above = np.flatnonzero(h > 0)
    if len(above):
        witness = float(grid[above[0]])
        logging.info(f"Existence witness f(R) > g(R) at R={witness}")
        return ExistenceCertificate(True, witness, False, below, grid_points, touching)
    if touching:
        logging.warning(f"f touches g without exceeding it at R={touching}")
    return ExistenceCertificate(False, None, False, below, grid_points, touching)


def monotone_profile(m, grid_points=MONOTONE_GRID):
    """(non_increasing, constant) judged from f' on a dense grid over [0, 1]."""
    deriv = m.rate(np.linspace(0.0, 1.0, grid_points)).deriv
    return bool(np.all(deriv <= 0.0)), bool(np.all(deriv == 0.0))


def global_certificates(m, roots, tie_tol=TIE_TOL, grid_points=GRID_POINTS, monotone_grid=MONOTONE_GRID,
                        tangencies=()):
    """
    Combine the uniqueness and global-stability results for this model.

    Args:
        m (Model): The model.
        roots (list | EndemicSearch): Endemic equilibria from find_endemic_equilibria.
        tie_tol (float): Tolerance for f(0) = k and f' = g' ties.
        tangencies (list): Unresolved near-touch points; taken from roots when it is an EndemicSearch.

    Returns:
        Certificates: existence, uniqueness and global verdicts. Any possible tangency
        leaves the global verdict Unknown.
    """
    if isinstance(roots, EndemicSearch):
        tangencies = roots.tangencies
    roots = list(roots)
    tangencies = list(tangencies)
    k = m.k
    f0 = float(m.rate(0.0).value)
    existence = existence_certificate(m, grid_points)

    monotone, constant = monotone_profile(m, monotone_grid)
    if monotone and f0 < k - tie_tol:
        uniqueness = UniquenessCertificate('NoEndemic', 'f is non-increasing and f(0) < k', monotone, constant)
    elif monotone and f0 > k + tie_tol:
        uniqueness = UniquenessCertificate('UniqueStable', 'f is non-increasing and f(0) > k', monotone, constant)
    elif monotone:
        uniqueness = UniquenessCertificate('NotApplicable', 'f(0) = k', monotone, constant)
    else:
        uniqueness = UniquenessCertificate('NotApplicable', 'f is neither constant nor non-increasing', monotone, constant)

    expected = {'NoEndemic': 0, 'UniqueStable': 1}.get(uniqueness.verdict)
    if expected is not None and expected != len(roots):
        logging.warning(f"Uniqueness result predicts {expected} endemic equilibria, the grid found {len(roots)}")

    if tangencies:
        where = ', '.join(f"R={r}" for r in tangencies)
        verdict = GlobalCertificate(GlobalVerdict.UNKNOWN, None, f"possible tangency at {where}")
    elif f0 < k - tie_tol and not roots:
        result = 'disease-free-global'
        verdict = GlobalCertificate(GlobalVerdict.DISEASE_FREE, result, 'f(0) < k and (0,0) is the only equilibrium')
    elif f0 > k + tie_tol and len(roots) == 1 and abs(roots[0].df - roots[0].dg) > tie_tol:
        result = 'endemic-global'
        verdict = GlobalCertificate(GlobalVerdict.ENDEMIC, result,
                                    f"f(0) > k, unique endemic equilibrium {roots[0].id}, f' != g' there")
    else:
        reasons = []
        if abs(f0 - k) <= tie_tol:
            reasons.append('f(0) = k')
        if f0 < k - tie_tol and roots:
            reasons.append(f"f(0) < k but {len(roots)} endemic equilibria exist")
        if f0 > k + tie_tol and len(roots) != 1:
            reasons.append(f"{len(roots)} endemic equilibria (need exactly 1)")
        if f0 > k + tie_tol and len(roots) == 1:
            reasons.append(f"tangential crossing at {roots[0].id}")
        verdict = GlobalCertificate(GlobalVerdict.UNKNOWN, None, '; '.join(reasons))
    logging.info(f"Global certificate: {verdict.verdict.value} ({verdict.reason})")
    return Certificates(existence, uniqueness, verdict)


def successor_prediction(e, m, roots):
    """
    A saddle endemic equilibrium must be followed by another root with larger R*.

    Args:
        e (Equilibrium): The equilibrium to check.
        m (Model): The model (f finite on [0,1]).
        roots (list): All endemic equilibria sorted by R*.

    Returns:
        SuccessorCheck: applies only to Saddle points; vacuous otherwise.
    """
    if e.classification is not Stability.SADDLE:
        return SuccessorCheck(e.id, False, True, None)
    later = [r for r in roots if r.R > e.R]
    if not later:
        logging.warning(f"Saddle {e.id} at R*={e.R} has no larger root; refine the grid")
        return SuccessorCheck(e.id, True, False, None)
    return SuccessorCheck(e.id, True, True, later[0].id)


def reproduction_profile(m, positivity):
    """f(R)/k at R=0 and its range over the positivity grid; classical R0 for constant f."""
    grid = np.linspace(0.0, 1.0, positivity.grid_points)
    ratio = m.rate(grid).value / m.k
    return {
        'at_zero': float(m.rate(0.0).value) / m.k,
        'min': float(np.min(ratio)),
        'max': float(np.max(ratio)),
        'classical_r0': classical_r0(m),
    }


def analyze_model(m, grid_points=GRID_POINTS, tol=BISECTION_TOL, tie_tol=TIE_TOL,
                  positivity_grid=POSITIVITY_GRID, monotone_grid=MONOTONE_GRID):
    """
    Run every check on a model.

    Returns:
        Analysis: positivity, equilibria, certificates, successor checks and settings.
    """
    positivity = m.check_positive(positivity_grid)
    search = find_endemic_equilibria(m, grid_points, tol, tie_tol)
    disease_free = disease_free_equilibrium(m, tie_tol)
    certificates = global_certificates(m, search, tie_tol, grid_points, monotone_grid)
    successors = [successor_prediction(e, m, search.equilibria) for e in search.equilibria]
    settings = {
        'grid_points': grid_points,
        'bisection_tol': tol,
        'tie_tol': tie_tol,
        'tangency_tol': TANGENCY_TOL,
        'positivity_grid': positivity_grid,
        'monotone_grid': monotone_grid,
        'search_right_end': search.right_end,
    }
    return Analysis(
        model=m,
        positivity=positivity,
        disease_free=disease_free,
        search=search,
        certificates=certificates,
        successors=successors,
        reproduction=reproduction_profile(m, positivity),
        settings=settings,
    )
