"""
model.py: Dimensionless SIR model with a recovery-dependent infection rate f(R).

The reduced system on {I >= 0, R >= 0, I + R <= 1} is

    dI/dtau = I [f(R)(1 - I - R) - k]
    dR/dtau = (k - 1) I - R

and endemic equilibria are the crossings of f with the threshold g(R) = (k-1)/((k-1)/k - R).
"""
import math
from dataclasses import dataclass
from typing import Optional
import numpy as np
from models.dual import DualValue
from models.exprfn import InfectionRate, check_positive
from helpers.constants import POLE_GUARD, INVARIANCE_TOL, POSITIVITY_GRID
from helpers.errors import ValidationError, PoleError


@dataclass(frozen=True)
class RawRates:
    """
    Per-unit-time rates of the dimensional model.

    Attributes:
        mu (float): Birth/mortality rate, > 0.
        gamma (float): Recovery rate, > 0.
    """

    mu: float
    gamma: float

    def __post_init__(self):
        for name in ('mu', 'gamma'):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be > 0, got {value}")


@dataclass(frozen=True)
class Redimensionalized:
    """
    Dimensionless parameters derived from raw rates.

    Attributes:
        k (float): 1 + gamma/mu.
        time_scale (float): mu, so that tau = mu * t.
        beta_tilde (float | None): beta/mu when a constant beta was given.
        r0 (float | None): beta_tilde / k when a constant beta was given.
    """

    k: float
    time_scale: float
    beta_tilde: Optional[float] = None
    r0: Optional[float] = None


def redimensionalize(raw, beta=None):
    """
    Convert raw rates to the dimensionless parameter k.

    Args:
        raw (RawRates): Validated rates.
        beta (float, optional): Constant per-unit-time infection rate.

    Returns:
        Redimensionalized: k, the time scale and, for constant beta, beta_tilde and R0.
    """
    k = 1.0 + raw.gamma / raw.mu
    if beta is None:
        return Redimensionalized(k=k, time_scale=raw.mu)
    if not (math.isfinite(beta) and beta > 0):
        raise ValidationError(f"beta must be > 0, got {beta}")
    beta_tilde = beta / raw.mu
    return Redimensionalized(k=k, time_scale=raw.mu, beta_tilde=beta_tilde, r0=beta_tilde / k)


@dataclass(frozen=True)
class State2:
    """Reduced state (I, R); S = 1 - I - R is implicit."""

    I: float
    R: float

    def validate(self, tol=INVARIANCE_TOL):
        if not (math.isfinite(self.I) and math.isfinite(self.R)):
            raise ValidationError(f"State must be finite, got {self}")
        if self.I < -tol or self.R < -tol or self.I + self.R > 1 + tol:
            raise ValidationError(f"State {self} is outside I >= 0, R >= 0, I + R <= 1")
        return self

    def as_array(self):
        return np.array([self.I, self.R], dtype=float)


@dataclass(frozen=True)
class State3:
    """Full state (S, I, R)."""

    S: float
    I: float
    R: float

    def validate(self, tol=INVARIANCE_TOL):
        values = (self.S, self.I, self.R)
        if not all(math.isfinite(v) for v in values):
            raise ValidationError(f"State must be finite, got {self}")
        if min(values) < -tol or abs(sum(values) - 1.0) > tol:
            raise ValidationError(f"State {self} is outside S, I, R >= 0 with S + I + R = 1")
        return self

    def as_array(self):
        return np.array([self.S, self.I, self.R], dtype=float)

    def reduced(self):
        return State2(self.I, self.R)


def pole_location(k):
    return (k - 1.0) / k


def g_threshold(r, k):
    """
    Threshold function g(R) = (k-1)/((k-1)/k - R).

    Args:
        r (float | ndarray): Recovered fraction(s).
        k (float): Model parameter.

    Raises:
        PoleError: If any r lies within 1e-14 of (k-1)/k.
    """
    pole = pole_location(k)
    gap = pole - np.asarray(r, dtype=float)
    if np.any(np.abs(gap) < POLE_GUARD):
        raise PoleError(f"g has a pole at R = {pole}")
    result = (k - 1.0) / gap
    return result if isinstance(r, np.ndarray) else float(result)


def g_dual(r, k):
    """g and dg/dR by dual arithmetic; dg/dR equals g^2/(k-1)."""
    pole = pole_location(k)
    if np.any(np.abs(pole - np.asarray(r, dtype=float)) < POLE_GUARD):
        raise PoleError(f"g has a pole at R = {pole}")
    return (k - 1.0) / (pole - DualValue.variable(r))


@dataclass(frozen=True)
class Model:
    """
    Dimensionless model: parameter k > 1 and infection rate f.

    Attributes:
        k (float): 1 + gamma/mu.
        f (InfectionRate): Recovery-dependent infection rate.
    """

    k: float
    f: InfectionRate

    def __post_init__(self):
        if not (isinstance(self.k, (int, float)) and math.isfinite(self.k) and self.k > 1):
            raise ValidationError(f"k must be a finite number > 1, got {self.k}")
        if not isinstance(self.f, InfectionRate):
            raise ValidationError(f"f must be an InfectionRate, got {type(self.f).__name__}")

    @property
    def pole(self):
        return pole_location(self.k)

    def rate(self, r):
        """DualValue (f(r), f'(r))."""
        return self.f.evaluate(r, self.k)

    def g(self, r):
        return g_threshold(r, self.k)

    def check_positive(self, grid_points=POSITIVITY_GRID):
        return check_positive(self.f, self.k, grid_points)

    def field_2d(self, I, R):
        """Right-hand side of the reduced system for scalar or array states."""
        f = self.f.evaluate(R, self.k).value
        S = 1.0 - I - R
        return I * (f * S - self.k), (self.k - 1.0) * I - R

    def field_3d(self, S, I, R):
        """Right-hand side of the full system for scalar or array states."""
        f = self.f.evaluate(R, self.k).value
        return 1.0 - f * S * I - S, I * (f * S - self.k), (self.k - 1.0) * I - R

    def describe(self):
        return {'k': self.k, 'f': self.f.describe()}


def vector_field_2d(s, m):
    """(dI, dR) at State2 s."""
    dI, dR = m.field_2d(s.I, s.R)
    return float(dI), float(dR)


def vector_field_3d(s, m):
    """(dS, dI, dR) at State3 s; the components sum to 1 - (S + I + R)."""
    dS, dI, dR = m.field_3d(s.S, s.I, s.R)
    return float(dS), float(dI), float(dR)


def jacobian_2d(s, m):
    """
    Jacobian of the reduced system at s.

    Returns:
        ndarray: [[f(1-I-R) - k - I f, I (f'(1-I-R) - f)], [k-1, -1]].
    """
    rate = m.rate(s.R)
    f, df = rate.value, rate.deriv
    S = 1.0 - s.I - s.R
    return np.array([
        [f * S - m.k - s.I * f, s.I * (df * S - f)],
        [m.k - 1.0, -1.0],
    ], dtype=float)


def eigenvalues_2x2(matrix):
    """
    Closed-form eigenvalues of a real 2x2 matrix.

    Returns:
        list: Two (real, imag) pairs sorted by real part.
    """
    (a, b), (c, d) = matrix
    if b == 0.0 or c == 0.0:
        # triangular: the diagonal is exact
        return sorted([(float(a), 0.0), (float(d), 0.0)])
    trace = a + d
    det = a * d - b * c
    disc = trace * trace - 4.0 * det
    if disc >= 0:
        root = math.sqrt(disc)
        big = (trace + math.copysign(root, trace)) / 2.0
        small = det / big if big != 0 else 0.0
        return sorted([(float(big), 0.0), (float(small), 0.0)])
    half = trace / 2.0
    imag = math.sqrt(-disc) / 2.0
    return [(float(half), -imag), (float(half), imag)]


def trace_det(matrix):
    (a, b), (c, d) = matrix
    return float(a + d), float(a * d - b * c)


def dulac_divergence(s, m):
    """
    Divergence of the field weighted by 1/I: -f(R) - 1/I.

    Raises:
        ValidationError: If I <= 0.
    """
    if not s.I > 0:
        raise ValidationError(f"Dulac divergence needs I > 0, got I = {s.I}")
    return -float(m.rate(s.R).value) - 1.0 / s.I
