r"""Slow-moving polaron: drag parameter, first-order bound and effective mass.

With ``V_k^2 = 4 pi alpha / k`` and isotropic mode sums, every first-order
quantity reduces to a radial integral of an angular moment

.. math:: S_{j,p}(A, B) = \int_{-1}^{1} \frac{u^j\,du}{(A - B u)^p},
          \qquad A = 1 + k,\ u = \cos\theta,

which is evaluated exactly (series in ``B/A`` for small ratios, the
antiderivative in ``w = A - B u`` otherwise).  The radial integral over
``[0, k0]`` uses adaptive quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, DegenerateMomentsError, DomainError, NumericError, RegimeError
from .model import FChoice, ModelParams, as_vector, build_hamiltonian
from .reference import closed_forms

__all__ = [
    "EtaSolution",
    "MovingBound",
    "EffectiveMassResult",
    "solve_eta",
    "moving_bound",
    "effective_mass",
    "angular_moment",
    "DAMPING",
    "ETA_TOL",
    "MAX_ITER",
]

DAMPING = 0.5
ETA_TOL = 1e-12
ETA_RTOL = 1e-11
MAX_ITER = 200
_SERIES_RATIO = 0.25
_QUAD = dict(epsabs=1e-15, epsrel=1e-13, limit=400)


@dataclass(frozen=True)
class EtaSolution:
    eta: float
    residual: float
    iterations: int
    converged: bool
    f_choice: FChoice


@dataclass(frozen=True)
class MovingBound:
    P: tuple
    energy: float
    eta: EtaSolution


@dataclass(frozen=True)
class EffectiveMassResult:
    m_eff: float
    E0: float
    fit_residual: float


def angular_moment(j: int, p: int, A: float, B: float, start: int = 0) -> float:
    """``S_{j,p}(A, B)`` minus the first ``start`` terms of its series in ``B/A``.

    Requires ``A > |B|``.  Dropping leading terms lets callers subtract the
    ``B = 0`` value without cancellation.
    """
    if not A > abs(B):
        raise RegimeError(f"angular denominator vanishes (A={A}, B={B})")
    x = B / A
    if abs(x) < _SERIES_RATIO:
        return _series(j, p, x, start) / A**p
    full = _closed(j, p, A, B)
    return full - _series(j, p, x, 0, stop=start) / A**p


def _series(j, p, x, start, stop=None):
    # 1/(1 - x u)^p = sum_n C(n+p-1, p-1) x^n u^n ; int u^{j+n} = 2/(j+n+1) for even j+n
    total = 0.0
    n = start
    while True:
        if stop is not None and n >= stop:
            break
        if (j + n) % 2 == 0:
            term = math.comb(n + p - 1, p - 1) * x**n * 2.0 / (j + n + 1)
            total += term
            if stop is None and abs(term) < 1e-18 * max(abs(total), 1e-300) and n > start + 2:
                break
        if stop is None and n > start + 400:
            raise NumericError("angular series did not converge")
        n += 1
    return total


def _closed(j, p, A, B):
    # u = (A - w)/B, du = -dw/B, u: -1 -> 1 maps to w: A+B -> A-B
    lo, hi = A - B, A + B
    total = 0.0
    for i in range(j + 1):
        e = i - p
        prim = math.log(hi / lo) if e == -1 else (hi ** (e + 1) - lo ** (e + 1)) / (e + 1)
        total += math.comb(j, i) * A ** (j - i) * (-1) ** i * prim
    return total / B ** (j + 1)


def _radial(fn, k0: float) -> float:
    val, err = integrate.quad(fn, 0.0, k0, **_QUAD)
    if not math.isfinite(val):
        raise NumericError("radial quadrature returned a non-finite value")
    return val


def _check_subsonic(P: float, eta: float):
    if not P * (1.0 - eta) < 0.5:
        raise RegimeError(
            f"supersonic configuration: |P|(1-eta) = {P * (1.0 - eta):.6g} >= 1/2; "
            "denominators k + k^2 - 2(1-eta) k.P change sign on the band"
        )


def _validate(alpha, k0, P):
    if not (math.isfinite(alpha) and alpha >= 0):
        raise DomainError("alpha must be finite and >= 0")
    if not (math.isfinite(k0) and k0 > 0):
        raise DomainError("k0 must be finite and > 0")
    vec = as_vector(P)
    if not all(math.isfinite(c) for c in vec):
        raise DomainError("P must be finite")
    return vec, math.sqrt(sum(c * c for c in vec))


def _pshifted_rhs(alpha, k0, P, eta):
    """``(1/P^2) sum_k V^2 (k.P) / D^2`` for the shifted profile."""
    B = 2.0 * P * (1.0 - eta)
    integral = _radial(lambda k: angular_moment(1, 2, 1.0 + k, B), k0)
    return alpha / (math.pi * P) * integral


def _linear_coefficients(alpha, k0, P):
    """``(c0, c1, c2)`` with ``eta P^2 = c0 + c1 eta + c2 eta^2``."""
    B = 2.0 * P
    c0 = alpha * P / math.pi * _radial(lambda k: angular_moment(1, 2, 1.0 + k, B), k0)
    c1 = (
        4.0 * P**2 * math.sqrt(4.0 * math.pi * alpha) / (4.0 * math.pi**2)
        * _radial(lambda k: k**1.5 * angular_moment(2, 2, 1.0 + k, B), k0)
    )
    c2 = P**3 / math.pi**2 * _radial(lambda k: k**3 * angular_moment(3, 2, 1.0 + k, B), k0)
    return c0, c1, c2


def solve_eta(alpha: float, k0: float, P, f_choice=FChoice.PSHIFTED, *, tol: float = ETA_TOL) -> EtaSolution:
    """Self-consistent drag parameter ``eta`` with ``eta P^2 = sum_k f_k^2 k.P``.

    PShifted iterates ``eta <- (1-d) eta + d F(eta)`` with damping ``d = 0.5``
    until ``|eta P^2 - sum f^2 k.P| <= tol * max(1, P^2)`` and the step is
    below ``1e-11`` relative.  LinearEliminating
    solves its quadratic in closed form, taking the root that stays finite as
    the quadratic coefficient vanishes.  The simple choice has ``eta = 0``.

    Raises
    ------
    RegimeError
        If ``|P|(1 - eta) >= 1/2`` at any iterate.
    ConvergenceError
        If the fixed point is not reached within the iteration cap.
    """
    choice = FChoice.parse(f_choice)
    _, Pm = _validate(alpha, k0, P)
    if Pm == 0.0 or alpha == 0.0 or choice is FChoice.SIMPLE:
        if choice is not FChoice.SIMPLE:
            _check_subsonic(Pm, 0.0)
        return EtaSolution(0.0, 0.0, 0, True, choice)
    scale = max(1.0, Pm**2)
    if choice is FChoice.LINEAR_ELIMINATING:
        _check_subsonic(Pm, 0.0)
        c0, c1, c2 = _linear_coefficients(alpha, k0, Pm)
        b = c1 - Pm**2
        disc = b * b - 4.0 * c2 * c0
        if disc < 0:
            raise RegimeError("drag quadratic has no real root")
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        eta = c0 / q
        resid = c0 + c1 * eta + c2 * eta**2 - eta * Pm**2
        return EtaSolution(eta, resid, 0, abs(resid) <= 1e-10 * scale + 1e-12 * abs(c0), choice)
    # small-P limit of the fixed point: eta0 = c/(1+c)
    c = 4.0 * alpha / (3.0 * math.pi) * (1.0 - (1.0 + k0) ** -2)
    eta = c / (1.0 + c)
    resid = math.inf
    for it in range(1, MAX_ITER + 1):
        _check_subsonic(Pm, eta)
        target = _pshifted_rhs(alpha, k0, Pm, eta)
        resid = (eta - target) * Pm**2
        # the relative step test keeps weak coupling from stopping at the initial guess
        if abs(resid) <= tol * scale and abs(eta - target) <= ETA_RTOL * abs(target):
            return EtaSolution(eta, resid, it - 1, True, choice)
        eta = (1.0 - DAMPING) * eta + DAMPING * target
    raise ConvergenceError(f"eta iteration did not converge in {MAX_ITER} steps", residual=resid)


def _energy(alpha, k0, Pm, sol: EtaSolution) -> float:
    E_W = closed_forms(alpha, k0).E_W
    if Pm == 0.0:
        return E_W
    eta = sol.eta
    choice = sol.f_choice
    if choice is FChoice.SIMPLE:
        # isotropy removes every P-odd contribution of <0|H|0>
        return Pm**2 + E_W
    if choice is FChoice.PSHIFTED:
        _check_subsonic(Pm, eta)
        B = 2.0 * Pm * (1.0 - eta)

        def excess(k):
            A = 1.0 + k
            # int (A - 2Bu)/(A - Bu)^2 du with its B = 0 value 2/A removed
            return A * angular_moment(0, 2, A, B, start=1) - 2.0 * B * angular_moment(1, 2, A, B)

        return Pm**2 * (1.0 - eta) ** 2 + E_W - alpha / math.pi * _radial(excess, k0)
    _check_subsonic(Pm, 0.0)
    B = 2.0 * Pm
    drag = 4.0 * eta**2 * Pm**2 / (4.0 * math.pi**2) * _radial(
        lambda k: k**3 * angular_moment(2, 1, 1.0 + k, B), k0
    )
    shift = -alpha / math.pi * _radial(lambda k: angular_moment(0, 1, 1.0 + k, B, start=1), k0)
    return Pm**2 * (1.0 + eta**2) + E_W + shift + drag


def moving_bound(alpha: float, k0: float, P, f_choice=FChoice.SIMPLE) -> MovingBound:
    """First-order upper bound ``<0|H(f)|0>`` at total momentum ``P``.

    For PShifted this is ``P^2(1-eta)^2 - sum V^2 (k + k^2 - 4 k.P(1-eta))/D^2``
    at the self-consistent ``eta``.  Every choice reduces to ``E_W`` at ``P = 0``.
    """
    choice = FChoice.parse(f_choice)
    vec, Pm = _validate(alpha, k0, P)
    sol = solve_eta(alpha, k0, vec, choice)
    return MovingBound(vec, _energy(alpha, k0, Pm, sol), sol)


def _higher_order_energy(alpha, k0, Pm, order, workers):
    from .bounds import solve_central
    from .wick import Measure, mean_energy, moment_vector

    terms = build_hamiltonian(ModelParams(alpha=1.0, k0=k0, P=Pm, f_choice=FChoice.SIMPLE))
    measure = Measure.continuum(k0)
    central = moment_vector(terms, measure, order, centered=True, workers=workers)
    mean = mean_energy(terms, measure)
    moments = central.at(alpha)
    try:
        return solve_central(mean(alpha), moments, order).bound
    except DegenerateMomentsError as exc:
        # the trial state spans an invariant space; the highest usable order is exact there
        return solve_central(mean(alpha), moments, max(exc.max_order, 1)).bound


def effective_mass(
    alpha: float,
    k0: float,
    f_choice=FChoice.PSHIFTED,
    h: float = 1e-2,
    order: int = 1,
    workers: int = 1,
) -> EffectiveMassResult:
    """Scalar effective mass from ``E(P) = E0 + P^2/(2 m_eff) + c4 P^4``.

    Energies at ``|P| = h, 2h`` give the Richardson estimate
    ``c2 = [16(E(h)-E0) - (E(2h)-E0)] / (12 h^2)``.  ``fit_residual`` is the
    eliminated quartic contribution ``|c4| h^4`` at the inner stencil point.
    Orders above one use Wick moments and the simple choice only.
    """
    choice = FChoice.parse(f_choice)
    if not h > 0:
        raise DomainError("stencil step h must be > 0")
    if order < 1:
        raise DomainError("order must be >= 1")
    if order > 1 and choice is not FChoice.SIMPLE:
        raise DomainError("higher-order moving bounds are available for the simple choice only")
    if 2 * h >= 0.5:
        raise RegimeError("stencil leaves the subsonic domain (need 2h < 1/2)")

    if order == 1:
        energy = lambda p: moving_bound(alpha, k0, p, choice).energy
    else:
        energy = lambda p: _higher_order_energy(alpha, k0, p, order, workers)
    E0 = energy(0.0)
    d1 = energy(h) - E0
    d2 = energy(2 * h) - E0
    c2 = (16.0 * d1 - d2) / (12.0 * h * h)
    c4 = (d2 - 4.0 * d1) / (12.0 * h**4)
    if not c2 > 0:
        raise NumericError(f"non-positive P^2 curvature {c2:.6g}; effective mass undefined")
    return EffectiveMassResult(m_eff=1.0 / (2.0 * c2), E0=E0, fit_residual=abs(c4) * h**4)
