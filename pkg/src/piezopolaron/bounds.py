r"""Upper bounds to the ground energy from power moments.

Given ``M_m = <psi|H^m|psi>`` for ``m = 0..2n``, the monic polynomial
``P_n(x) = sum_i X_i x^(n-i)`` solving the Hankel system

.. math:: \sum_{j=1}^n M_{2n-(i+j)} X_j + M_{2n-i} = 0,\qquad i = 1..n

is the degree-``n`` orthogonal polynomial of the spectral measure of ``H``
in ``|psi>``.  Its smallest root is an upper bound to the lowest eigenvalue
and does not increase with ``n``.

Instead of inverting the Hankel matrix the solver shifts the moments by the
mean, scales by the standard deviation, builds the three-term recurrence
with the Chebyshev algorithm in extended precision and takes the roots as
eigenvalues of the symmetric tridiagonal Jacobi matrix (real by
construction).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from .errors import DegenerateMomentsError, DomainError

__all__ = [
    "BoundResult",
    "solve_bound",
    "solve_central",
    "bound_sequence",
    "second_order_closed_form",
    "recurrence_coefficients",
]

_DPS = 60
#: relative threshold on recurrence coefficients signalling Krylov closure
DEGENERACY_TOL = 1e-12
#: slack allowed on the monotonicity check
MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class BoundResult:
    """Order-``n`` moment bound.

    Attributes
    ----------
    order : int
    poly_coeffs : tuple of float
        ``X_0 .. X_n`` with ``X_0 = 1``.
    roots : tuple of float
        All roots of ``P_n`` in ascending order.
    bound : float
        ``min(roots)``.
    condition_estimate : float
        2-norm condition number of the standardized Hankel matrix.
    residual : float
        ``max |P_n(root)|`` relative to ``max(sum |X_i| |root|^(n-i), max |X_i|)``.
    non_increasing : bool or None
        Whether ``bound`` does not exceed the previous order's bound (set by
        :func:`bound_sequence`).
    """

    order: int
    poly_coeffs: tuple
    roots: tuple
    bound: float
    condition_estimate: float
    residual: float
    non_increasing: bool | None = None


def _mp(x):
    if isinstance(x, mpmath.mpf):
        return x
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def recurrence_coefficients(moments, n: int):
    """Chebyshev algorithm: ``(a_0..a_{n-1}), (b_0..b_n)`` from moments.

    ``moments`` must hold at least ``2n+1`` entries; ``b_n`` uses the last.
    Computation is carried out at the current mpmath precision.
    """
    mu = [_mp(x) for x in moments[: 2 * n + 1]]
    L = len(mu)
    a, b = [], [mu[0]]
    prev = [mpmath.mpf(0)] * L
    cur = list(mu)
    a.append(mu[1] / mu[0])
    for k in range(1, n + 1):
        nxt = [mpmath.mpf(0)] * L
        for l in range(k, L - k):
            nxt[l] = cur[l + 1] - a[k - 1] * cur[l] - b[k - 1] * prev[l]
        if cur[k - 1] == 0:
            raise DegenerateMomentsError("zero norm in recurrence", max_order=k - 1)
        b.append(nxt[k] / cur[k - 1])
        if k < n:
            if nxt[k] == 0:
                raise DegenerateMomentsError("zero norm in recurrence", max_order=k)
            a.append(nxt[k + 1] / nxt[k] - cur[k] / cur[k - 1])
        prev, cur = cur, nxt
    return a, b


def _central_from_raw(moments, c):
    out = []
    for j in range(len(moments)):
        out.append(mpmath.fsum(math.comb(j, i) * moments[i] * (-c) ** (j - i) for i in range(j + 1)))
    return out


def _expand(roots_poly_y, s, c, n):
    """Coefficients in ``x`` of ``s^n * pi_n((x - c)/s)``."""
    # pi_n(y) coefficients ascending -> substitute y = (x - c)/s
    coeffs = [mpmath.mpf(0)] * (n + 1)  # ascending powers of x
    for j, cj in enumerate(roots_poly_y):
        # cj * ((x - c)/s)^j * s^n
        scale = cj * s ** (n - j)
        for i in range(j + 1):
            coeffs[i] += scale * math.comb(j, i) * (-c) ** (j - i)
    return list(reversed(coeffs))  # descending: X_0 .. X_n


def solve_central(mean, central, n: int) -> BoundResult:
    """Order-``n`` bound from the mean and central moments ``mu_0 .. mu_2n``."""
    if n < 1:
        raise DomainError("order n must be >= 1")
    if len(central) < 2 * n + 1 and n > 1:
        raise DomainError(f"need {2 * n + 1} moments for order {n}, got {len(central)}")
    with mpmath.workdps(_DPS):
        c = _mp(mean)
        if n == 1:
            return BoundResult(1, (1.0, float(-c)), (float(c),), float(c), 1.0, 0.0)
        mu = [_mp(x) for x in central[: 2 * n + 1]]
        if abs(mu[0] - 1) > 1e-12:
            raise DomainError("moments must be normalized (M_0 = 1)")
        if not mu[2] > 0:
            raise DegenerateMomentsError("vanishing variance: trial state is an eigenstate", max_order=1)
        s = mpmath.sqrt(mu[2])
        nu = [mu[j] / s**j for j in range(len(mu))]
        nu[1] = mpmath.mpf(0)
        a, b = recurrence_coefficients(nu, n)
        ref = max(mpmath.mpf(1), b[1])
        for j in range(1, n):
            if b[j] < DEGENERACY_TOL * ref:
                raise DegenerateMomentsError(
                    f"recurrence coefficient b_{j} = {mpmath.nstr(b[j], 5)} signals a "
                    f"Krylov space of dimension {j} < {n}",
                    max_order=j,
                )
        if b[n] < -DEGENERACY_TOL * ref * 1e3:
            raise DegenerateMomentsError(
                f"indefinite Hankel matrix at order {n + 1} (b_{n} < 0)", max_order=n
            )
        T = mpmath.zeros(n, n)
        for i in range(n):
            T[i, i] = a[i]
            if i + 1 < n:
                T[i, i + 1] = T[i + 1, i] = mpmath.sqrt(b[i + 1])
        evals = mpmath.eigsy(T, eigvals_only=True)
        ys = sorted(evals[i] for i in range(n))
        # monic orthogonal polynomial in y from the recurrence
        p_prev, p_cur = [mpmath.mpf(1)], [-a[0], mpmath.mpf(1)]
        for k in range(1, n):
            nxt = [mpmath.mpf(0)] * (k + 2)
            for i, v in enumerate(p_cur):
                nxt[i + 1] += v
                nxt[i] -= a[k] * v
            for i, v in enumerate(p_prev):
                nxt[i] -= b[k] * v
            p_prev, p_cur = p_cur, nxt
        X = _expand(p_cur, s, c, n)
        roots = [c + s * y for y in ys]
        resid = mpmath.mpf(0)
        for r in roots:
            val = mpmath.fsum(X[i] * r ** (n - i) for i in range(n + 1))
            size = mpmath.fsum(abs(X[i]) * abs(r) ** (n - i) for i in range(n + 1))
            resid = max(resid, abs(val) / max(size, max(abs(x) for x in X)))
        hankel = np.array([[float(nu[i + j]) for j in range(n)] for i in range(n)])
        with np.errstate(all="ignore"):
            cond = float(np.linalg.cond(hankel)) if np.all(np.isfinite(hankel)) else math.inf
        return BoundResult(
            order=n,
            poly_coeffs=tuple(float(x) for x in X),
            roots=tuple(float(r) for r in roots),
            bound=float(roots[0]),
            condition_estimate=cond,
            residual=float(resid),
        )


def solve_bound(moments, n: int) -> BoundResult:
    """Order-``n`` upper bound from raw moments ``M_0 .. M_2n``.

    Raises
    ------
    DegenerateMomentsError
        If the moments are exhausted by a Krylov space of dimension ``< n``;
        ``exc.max_order`` gives the largest usable order.
    """
    if n < 1:
        raise DomainError("order n must be >= 1")
    if len(moments) < 2 * n + 1:
        raise DomainError(f"need {2 * n + 1} moments for order {n}, got {len(moments)}")
    with mpmath.workdps(_DPS):
        M = [_mp(x) for x in moments[: 2 * n + 1]]
        if abs(M[0] - 1) > 1e-12:
            raise DomainError("moments must be normalized (M_0 = 1)")
        c = M[1]
        return solve_central(c, _central_from_raw(M, c), n)


def bound_sequence(moments, n_max: int, *, mean=None) -> list:
    """Bounds for ``n = 1 .. n_max``, stopping early at a degenerate order.

    With ``mean`` given, ``moments`` are taken as central moments.
    """
    if len(moments) < 2 * n_max + 1:
        raise DomainError(f"need {2 * n_max + 1} moments for order {n_max}")
    out: list = []
    for n in range(1, n_max + 1):
        try:
            res = solve_central(mean, moments, n) if mean is not None else solve_bound(moments, n)
        except DegenerateMomentsError:
            break
        flag = None if not out else res.bound <= out[-1].bound + MONOTONE_SLACK
        out.append(
            BoundResult(
                res.order, res.poly_coeffs, res.roots, res.bound,
                res.condition_estimate, res.residual, flag,
            )
        )
    return out


def second_order_closed_form(mean: float, K2: float, K3: float) -> float:
    """``mean + K3/(2K2) - sqrt((K3/(2K2))^2 + K2)`` (returns ``mean`` if ``K2 <= 0``)."""
    if not K2 > 1e-300:
        return float(mean)
    x = K3 / (2.0 * K2)
    root = math.hypot(x, math.sqrt(K2))
    if x > 0:
        # mean + x - root = mean - K2 / (x + root), free of cancellation
        return float(mean - K2 / (x + root))
    return float(mean + x - root)
