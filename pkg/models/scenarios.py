"""
scenarios.py: Builds the reference models: the multistable sinusoid construction,
the increasing quadratic with a unique endemic equilibrium, and the classical constant rate.
"""
import math
import logging
from dataclasses import dataclass
from typing import Optional
import numpy as np
from models.dual import DualValue
from models.exprfn import InfectionRate, ExpressionRate, check_positive
from models.model import Model, pole_location
from helpers.constants import POSITIVITY_GRID
from helpers.errors import ValidationError, ConstructionError


def _check_k(k):
    if not (isinstance(k, (int, float)) and math.isfinite(k) and k > 1):
        raise ValidationError(f"k must be a finite number > 1, got {k}")


@dataclass(frozen=True)
class Example1Spec:
    """
    Parameters of the multistable construction.

    Attributes:
        n (int): Number of saddle knots; 2n - 1 knots in total.
        k (float): Model parameter > 1.
        f0 (float | None): f(0) in (0, k); defaults to k/2.
    """

    n: int
    k: float
    f0: Optional[float] = None

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n}")
        _check_k(self.k)
        if self.f0 is not None and not (0 < self.f0 < self.k):
            raise ValidationError(f"f0 must lie in (0, k) = (0, {self.k}), got {self.f0}")

    @property
    def f_zero(self):
        return self.k / 2.0 if self.f0 is None else float(self.f0)

    @property
    def spacing(self):
        return pole_location(self.k) / (2 * self.n)

    @property
    def knots(self):
        """R*_i = i ((k-1)/k) / (2n) for i = 1 .. 2n-1."""
        return [i * self.spacing for i in range(1, 2 * self.n)]

    @property
    def omega(self):
        """Angular frequency 2 n pi k / (k - 1) of the sinusoid."""
        return 2 * self.n * math.pi * self.k / (self.k - 1.0)


@dataclass(frozen=True)
class Example2Spec:
    k: float

    def __post_init__(self):
        _check_k(self.k)


class Example1Rate(InfectionRate):
    """
    Piecewise C1 rate: cubic Hermite on [0, R*_1), g - sin(omega R) on [R*_1, R*_{2n-1}],
    linear continuation beyond R*_{2n-1}.
    """

    kind = 'example1'

    def __init__(self, spec):
        self.spec = spec
        k = spec.k
        self.k = k
        self.pole = pole_location(k)
        self.omega = spec.omega
        knots = spec.knots
        self.left = knots[0]
        self.right = knots[-1]
        g_left, dg_left = self._g(self.left)
        g_right, dg_right = self._g(self.right)
        # at odd knots cos(i pi) = -1, so f' = g' + omega
        self.hermite = (spec.f_zero, g_left, dg_left + self.omega)
        self.line = (g_right, dg_right + self.omega)

    def _g(self, r):
        g = (self.k - 1.0) / (self.pole - r)
        return g, g * g / (self.k - 1.0)

    def _hermite(self, r):
        f0, y1, m1 = self.hermite
        h = self.left
        t = r / h
        t2, t3 = t * t, t * t * t
        value = (2 * t3 - 3 * t2 + 1) * f0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1
        deriv = ((6 * t2 - 6 * t) * f0 + (-6 * t2 + 6 * t) * y1) / h + (3 * t2 - 2 * t) * m1
        return value, deriv

    def _sinusoid(self, r):
        with np.errstate(all='ignore'):
            g = (self.k - 1.0) / (self.pole - r)
            dg = g * g / (self.k - 1.0)
        return g - np.sin(self.omega * r), dg - self.omega * np.cos(self.omega * r)

    def _linear(self, r):
        y, m = self.line
        return y + m * (r - self.right), m + 0.0 * r

    def evaluate(self, r, k=None):
        if k is not None and k != self.k:
            raise ValidationError(f"This rate was built for k = {self.k}, not {k}")
        if isinstance(r, np.ndarray):
            r = r.astype(float)
            value = np.empty_like(r)
            deriv = np.empty_like(r)
            segments = (
                (r < self.left, self._hermite),
                ((r >= self.left) & (r <= self.right), self._sinusoid),
                (r > self.right, self._linear),
            )
            for mask, piece in segments:
                if np.any(mask):
                    v, d = piece(r[mask])
                    value[mask] = v
                    deriv[mask] = d
            return DualValue(value, deriv)
        r = float(r)
        if r < self.left:
            v, d = self._hermite(r)
        elif r <= self.right:
            v, d = self._sinusoid(r)
        else:
            v, d = self._linear(r)
        return DualValue(float(v), float(d))

    def describe(self):
        return {'kind': 'example1', 'n': self.spec.n, 'k': self.spec.k, 'f0': self.spec.f_zero}

    def __repr__(self):
        return f"Example1Rate(n={self.spec.n}, k={self.k}, f0={self.spec.f_zero})"


def _validate_example1(rate, grid_points=POSITIVITY_GRID):
    spec = rate.spec
    positivity = check_positive(rate, spec.k, grid_points)
    if not positivity.positive:
        raise ConstructionError(
            f"Constructed f is not positive (f({positivity.witness}) = {positivity.min_value}); adjust f0")
    # interior of (0, R*_1), both endpoints excluded
    interior = np.linspace(0.0, rate.left, grid_points)[1:-1]
    below = rate.evaluate(interior).value - (spec.k - 1.0) / (rate.pole - interior)
    if np.any(below >= 0):
        where = float(interior[int(np.argmax(below))])
        raise ConstructionError(
            f"Left segment of f reaches g at R = {where} before the first knot; adjust f0")


def build_example1(spec):
    """
    Build the multistable model with 2n - 1 sinusoid knots.

    Args:
        spec (Example1Spec): n, k and f(0).

    Returns:
        Model: The constructed model.

    Raises:
        ConstructionError: If f is not positive or the left segment crosses g.
    """
    rate = Example1Rate(spec)
    _validate_example1(rate)
    logging.info(f"Built example1 model n={spec.n}, k={spec.k}, f0={spec.f_zero}")
    return Model(spec.k, rate)


def build_example2(spec):
    """Increasing quadratic f(R) = k R^2 + 2k."""
    rate = ExpressionRate.from_text('k*R^2 + 2*k', description={'kind': 'example2', 'k': spec.k})
    logging.info(f"Built example2 model k={spec.k}")
    return Model(spec.k, rate)


def build_constant(beta_tilde, k):
    """
    Classical SIR model, f = beta_tilde everywhere.

    Returns:
        Model: The constant-rate model; R0 = beta_tilde / k.
    """
    _check_k(k)
    if not (isinstance(beta_tilde, (int, float)) and math.isfinite(beta_tilde) and beta_tilde > 0):
        raise ValidationError(f"beta_tilde must be > 0, got {beta_tilde}")
    rate = ExpressionRate.from_text(repr(float(beta_tilde)),
                                    description={'kind': 'constant', 'beta_tilde': beta_tilde, 'k': k})
    if beta_tilde == k:
        logging.warning(f"Constant rate with R0 = 1 (beta_tilde = k = {k}): disease-free point is marginal")
    return Model(k, rate)


def classical_r0(model):
    """R0 = beta_tilde / k for constant-rate models, None otherwise."""
    description = model.f.describe()
    if description.get('kind') == 'constant':
        return description['beta_tilde'] / model.k
    return None
