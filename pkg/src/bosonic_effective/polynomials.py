"""Univariate real polynomials and Lagrange indicator polynomials.

Coefficients are ``fractions.Fraction`` when the polynomial was built exactly
(Lagrange indicators up to ``EXACT_NODE_LIMIT`` nodes) and ``float``
otherwise.  Exact polynomials evaluate exactly at integers, so values at
interpolation nodes are exactly 0 or 1; values too large for a double
become +-inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational

import numpy as np

from .errors import ContractViolation

EXACT_NODE_LIMIT = 256


def _trim(coeffs):
    coeffs = list(coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


@dataclass(frozen=True)
class RealPolynomial:
    """sum_k coefficients[k] * X**k, stored with no trailing zeros."""

    coefficients: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _trim(self.coefficients))
        # hashing Fractions is slow; polynomials are used as cache keys
        object.__setattr__(self, "_hash", hash(self.coefficients))

    def __hash__(self):
        return self._hash

    @classmethod
    def constant(cls, value) -> "RealPolynomial":
        return cls((value,))

    @classmethod
    def identity(cls) -> "RealPolynomial":
        return cls((0, 1))

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self.coefficients) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    @property
    def is_exact(self) -> bool:
        return all(isinstance(c, Rational) for c in self.coefficients)

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc

    def values_at_integers(self, upto: int) -> np.ndarray:
        """f(0), ..., f(upto) as floats, computed exactly when possible."""
        return _integer_values(self, upto)

    def __add__(self, other: "RealPolynomial") -> "RealPolynomial":
        n = max(len(self.coefficients), len(other.coefficients))
        a = self.coefficients + (0,) * (n - len(self.coefficients))
        b = other.coefficients + (0,) * (n - len(other.coefficients))
        return RealPolynomial(tuple(x + y for x, y in zip(a, b)))

    def __mul__(self, other):
        if isinstance(other, RealPolynomial):
            if self.is_zero or other.is_zero:
                return RealPolynomial()
            out = [0] * (len(self.coefficients) + len(other.coefficients) - 1)
            for i, a in enumerate(self.coefficients):
                for j, b in enumerate(other.coefficients):
                    out[i + j] += a * b
            return RealPolynomial(tuple(out))
        return RealPolynomial(tuple(c * other for c in self.coefficients))

    __rmul__ = __mul__

    def as_floats(self) -> list[float]:
        return [float(c) for c in self.coefficients]

    def to_json(self) -> list:
        # Fractions are written as floats; exactness is a construction-time property.
        return self.as_floats()

    @classmethod
    def from_json(cls, coeffs) -> "RealPolynomial":
        return cls(tuple(float(c) for c in coeffs))


def to_float(value) -> float:
    """float(value), saturating to +-inf instead of raising OverflowError."""
    try:
        return float(value)
    except OverflowError:
        return math.inf if value > 0 else -math.inf


@lru_cache(maxsize=4096)
def _integer_values(poly: RealPolynomial, upto: int) -> np.ndarray:
    coeffs = poly.coefficients
    out = np.empty(upto + 1, dtype=np.float64)
    if all(isinstance(c, Rational) for c in coeffs):
        # Horner on integer numerators over a common denominator
        denom = math.lcm(*(Fraction(c).denominator for c in coeffs)) if coeffs else 1
        nums = [int(Fraction(c) * denom) for c in coeffs]
        for m in range(upto + 1):
            acc = 0
            for c in reversed(nums):
                acc = acc * m + c
            out[m] = to_float(Fraction(acc, denom))
    else:
        for m in range(upto + 1):
            acc = 0.0
            for c in reversed(coeffs):
                acc = acc * m + c
            out[m] = acc
    out.setflags(write=False)
    return out


@lru_cache(maxsize=1024)
def lagrange_indicator(n: int, N: int) -> RealPolynomial:
    """P_n(X) = prod_{k != n, 0 <= k <= N} (X - k) / (n - k).

    P_n(m) is 1 at m = n and 0 at every other integer m in [0, N].
    Exact rational coefficients for N <= EXACT_NODE_LIMIT, floating point
    beyond (the coefficients grow like N^N / N!^2).
    """
    if not (0 <= n <= N):
        raise ContractViolation(f"indicator index n={n} outside [0, {N}]")
    # the numerator prod (X - k) has integer coefficients
    coeffs = [1]
    denom = 1
    for k in range(N + 1):
        if k == n:
            continue
        shifted = [0] + coeffs
        for i, c in enumerate(coeffs):
            shifted[i] -= k * c
        coeffs = shifted
        denom *= n - k
    if N <= EXACT_NODE_LIMIT:
        return RealPolynomial(tuple(Fraction(c, denom) for c in coeffs))
    return RealPolynomial(tuple(to_float(Fraction(c, denom)) for c in coeffs))
