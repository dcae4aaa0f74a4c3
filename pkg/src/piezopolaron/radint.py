r"""Closed-form radial integrals.

Every continuum vacuum moment reduces to products of

.. math:: J(p, q; k_0) = \int_0^{k_0} \frac{k^p\,dk}{(k + k^2)^q}
          = \int_0^{k_0} k^{p-q} (1 + k)^{-q}\,dk .

With ``t = 1 + k`` the integrand becomes a finite Laurent polynomial in
``t``, so the result is an exact rational function of ``k0`` plus an integer
multiple of ``ln(1 + k0)``.  The rational part is accumulated exactly with
:class:`fractions.Fraction` (``k0`` is converted without rounding) and the
logarithm is combined with it in extended precision, which keeps full double
accuracy even where the two parts cancel (small ``k0``, large ``p``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath
from scipy import integrate

from .errors import DomainError, NumericError

__all__ = [
    "RadialIntegralKey",
    "radial_integral",
    "radial_integral_mp",
    "J",
    "quadrature_oracle",
]


@dataclass(frozen=True, order=True)
class RadialIntegralKey:
    """Index ``(p, q)`` and cutoff ``k0`` of one radial integral."""

    p: int
    q: int
    k0: float

    def __post_init__(self):
        if int(self.p) != self.p or int(self.q) != self.q:
            raise DomainError(f"p and q must be integers, got ({self.p}, {self.q})")
        if self.p < 0 or self.q < 0:
            raise DomainError(f"p and q must be non-negative, got ({self.p}, {self.q})")
        if not self.k0 > 0 or not math.isfinite(self.k0):
            raise DomainError(f"k0 must be positive and finite, got {self.k0}")
        if self.p - self.q <= -1:
            raise DomainError(
                f"J({self.p},{self.q}) diverges at k=0 (integrand ~ k^{self.p - self.q})"
            )


@lru_cache(maxsize=None)
def _exact_parts(s: int, q: int, k0: float) -> tuple[Fraction, int]:
    """Rational part and log coefficient of int_0^k0 k^s (1+k)^-q dk."""
    T = 1 + Fraction(k0)
    rational = Fraction(0)
    log_coeff = 0
    for j in range(s + 1):
        c = math.comb(s, j) * (-1) ** (s - j)
        e = j - q + 1
        if e == 0:
            log_coeff += c
        else:
            rational += Fraction(c, e) * (T**e - 1)
    return rational, log_coeff


def _working_dps(s: int, k0: float) -> int:
    # digits lost to cancellation: ~ s*log10(2) from binomials, plus the
    # k0^(s+1) smallness of the result when k0 < 1
    extra = 0.31 * s + (s + 1) * max(0.0, -math.log10(k0))
    return 30 + int(math.ceil(extra))


def radial_integral_mp(p: int, q: int, k0: float, dps: int = 40):
    """High-precision value of ``J(p, q; k0)`` as an :class:`mpmath.mpf`."""
    key = RadialIntegralKey(p, q, k0)
    s = key.p - key.q
    rational, log_coeff = _exact_parts(s, key.q, float(key.k0))
    with mpmath.workdps(max(dps, _working_dps(s, key.k0)) + 10):
        val = mpmath.mpf(rational.numerator) / rational.denominator
        if log_coeff:
            val += log_coeff * mpmath.log1p(mpmath.mpf(key.k0))
        return +val


@lru_cache(maxsize=None)
def _radial_float(p: int, q: int, k0: float) -> float:
    s = p - q
    with mpmath.workdps(_working_dps(s, k0)):
        return float(radial_integral_mp(p, q, k0, dps=mpmath.mp.dps))


def radial_integral(key: RadialIntegralKey) -> float:
    """Closed-form value of ``J(p, q; k0)`` in double precision.

    Raises
    ------
    DomainError
        If the integral diverges at ``k = 0`` (``p - q <= -1``).
    """
    return _radial_float(key.p, key.q, float(key.k0))


def J(p: int, q: int, k0: float) -> float:
    """Shorthand for ``radial_integral(RadialIntegralKey(p, q, k0))``."""
    return radial_integral(RadialIntegralKey(p, q, k0))


def quadrature_oracle(key: RadialIntegralKey, tol: float = 1e-12) -> float:
    """Adaptive-quadrature value of the same integral (test oracle).

    Uses QUADPACK's adaptive Gauss-Kronrod rule with relative tolerance
    ``tol``.  Raises :class:`NumericError` if the requested tolerance is
    not met within the subdivision cap.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    s, q = key.p - key.q, key.q

    def integrand(k):
        return k**s * (1.0 + k) ** (-q)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                integrand, 0.0, float(key.k0), epsabs=0.0, epsrel=tol, limit=500
            )
        except integrate.IntegrationWarning as exc:
            raise NumericError(f"quadrature failed for {key}: {exc}") from exc
    if err > 10 * tol * abs(val):
        raise NumericError(f"quadrature error estimate {err:g} too large for {key}")
    return val
