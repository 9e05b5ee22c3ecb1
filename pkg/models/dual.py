"""
dual.py: Forward-mode dual numbers carrying a value and its derivative with respect to R.
Components may be floats or numpy arrays, so one evaluation can cover a whole grid.
"""
from dataclasses import dataclass
from typing import Union
import numpy as np
from helpers.errors import ExprDomainError

Number = Union[float, np.ndarray]


def _any(mask):
    return bool(np.any(mask))


@dataclass(frozen=True, eq=False)
class DualValue:
    """
    A dual number (value, deriv) with deriv = d(value)/dR.

    Attributes:
        value (float | ndarray): f(R).
        deriv (float | ndarray): df/dR.
    """

    value: Number
    deriv: Number = 0.0

    @staticmethod
    def constant(c):
        return DualValue(c, np.zeros_like(c, dtype=float) if isinstance(c, np.ndarray) else 0.0)

    @staticmethod
    def variable(r):
        if isinstance(r, np.ndarray):
            return DualValue(r, np.ones_like(r, dtype=float))
        return DualValue(r, 1.0)

    @staticmethod
    def _coerce(other):
        return other if isinstance(other, DualValue) else DualValue(other, 0.0)

    def __add__(self, other):
        o = DualValue._coerce(other)
        return DualValue(self.value + o.value, self.deriv + o.deriv)

    __radd__ = __add__

    def __sub__(self, other):
        o = DualValue._coerce(other)
        return DualValue(self.value - o.value, self.deriv - o.deriv)

    def __rsub__(self, other):
        return DualValue._coerce(other).__sub__(self)

    def __mul__(self, other):
        o = DualValue._coerce(other)
        return DualValue(self.value * o.value, self.deriv * o.value + self.value * o.deriv)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = DualValue._coerce(other)
        if _any(o.value == 0):
            raise ExprDomainError("Division by zero")
        with np.errstate(all='ignore'):
            inv = 1.0 / o.value
            return DualValue(self.value * inv, (self.deriv * o.value - self.value * o.deriv) * inv * inv)

    def __rtruediv__(self, other):
        return DualValue._coerce(other).__truediv__(self)

    def __neg__(self):
        return DualValue(-self.value, -self.deriv)

    def __pow__(self, other):
        o = DualValue._coerce(other)
        inputs = (self.value, self.deriv, o.value, o.deriv)
        a, da, b, db = (np.asarray(x, dtype=float) for x in inputs)
        with np.errstate(all='ignore'):
            if not _any(db != 0):
                # exponent is constant in R
                if _any((a == 0) & (b < 0)):
                    raise ExprDomainError("Zero raised to a negative power")
                if _any((a < 0) & (b != np.round(b))):
                    raise ExprDomainError("Negative base raised to a non-integer power")
                if _any((a == 0) & (b > 0) & (b < 1) & (da != 0)):
                    raise ExprDomainError("Derivative of a fractional power is unbounded at zero")
                value = a ** b
                slope = np.where(b == 0, 0.0, b * a ** np.where(b == 0, 1.0, b - 1.0))
                deriv = np.where(da == 0, 0.0, slope * da)
                return DualValue(_like(value, *inputs), _like(deriv, *inputs))
            if _any(a <= 0):
                raise ExprDomainError("Base must be positive when the exponent depends on R")
            value = a ** b
            deriv = value * (db * np.log(a) + b * da / a)
            return DualValue(_like(value, *inputs), _like(deriv, *inputs))


def _like(result, *inputs):
    """Return a Python float when every input was scalar."""
    if any(isinstance(x, np.ndarray) for x in inputs):
        return result
    return float(result)


def _unwrap(x, dual):
    return _like(x, dual.value, dual.deriv)


def sin(x):
    return DualValue(_unwrap(np.sin(x.value), x), _unwrap(np.cos(x.value) * x.deriv, x))


def cos(x):
    return DualValue(_unwrap(np.cos(x.value), x), _unwrap(-np.sin(x.value) * x.deriv, x))


def exp(x):
    e = np.exp(x.value)
    return DualValue(_unwrap(e, x), _unwrap(e * x.deriv, x))


def log(x):
    if _any(x.value <= 0):
        raise ExprDomainError("Logarithm of a non-positive value")
    return DualValue(_unwrap(np.log(x.value), x), _unwrap(x.deriv / x.value, x))


def sqrt(x):
    if _any(x.value < 0):
        raise ExprDomainError("Square root of a negative value")
    if _any((x.value == 0) & (x.deriv != 0)):
        raise ExprDomainError("Derivative of the square root is unbounded at zero")
    s = np.sqrt(x.value)
    with np.errstate(all='ignore'):
        ds = np.where(x.value == 0, 0.0, x.deriv / (2.0 * np.where(s == 0, 1.0, s)))
    return DualValue(_unwrap(s, x), _unwrap(ds, x))


def tanh(x):
    t = np.tanh(x.value)
    return DualValue(_unwrap(t, x), _unwrap((1.0 - t * t) * x.deriv, x))


FUNCTIONS = {
    'sin': sin,
    'cos': cos,
    'exp': exp,
    'log': log,
    'sqrt': sqrt,
    'tanh': tanh,
}
