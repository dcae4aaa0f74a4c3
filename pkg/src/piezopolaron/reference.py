"""Closed-form rest-frame results and the asymptotic lower bounds.

For the simple displacement at ``P = 0`` and the phonon vacuum:

* ``E_W = -(2 alpha/pi) ln(1 + k0)``   (first-order bound, ``= M_1``)
* ``K2  = (8 alpha^2 / 3 pi^2) F1^2``
* ``K3  = (16 alpha^2 / 3 pi^2)(F1 F2 + F1 F3) + (64 alpha^3 / 9 pi^3) F1^3``
* ``E_var = E_W + K3/(2K2) - sqrt((K3/(2K2))^2 + K2)``

with ``F1 = J(3,2)``, ``F2 = J(3,1)``, ``F3 = J(5,2)``.

The ``K3`` above counts the contracted ``k^2 a+a`` piece of the
normal-ordered ``(sum_k k n_k)^2`` twice.  A direct Wick evaluation of the
same Hamiltonian gives ``K3_wick = (16 alpha^2/3 pi^2) F1 F2 + (64
alpha^3/9 pi^3) F1^3`` (``F2 = J(4,2) + J(5,2)`` collects both phonon energy
and recoil).  Both are reported; ``E_var_wick`` is the second-order bound of
the Hamiltonian as built by :mod:`piezopolaron.model`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .bounds import second_order_closed_form
from .errors import DomainError

__all__ = [
    "RestFrameClosedForms",
    "closed_forms",
    "lower_bound_small",
    "lower_bound_large",
    "OutOfRegimeWarning",
    "F1",
    "F2",
    "F3",
]


class OutOfRegimeWarning(UserWarning):
    """An asymptotic formula was evaluated outside its stated regime."""


def F1(k0: float) -> float:
    # ln(1+k0) + 1/(1+k0) - 1, written to avoid cancellation at small k0
    return math.log1p(k0) - k0 / (1.0 + k0)


def F2(k0: float) -> float:
    return k0 * k0 / 2.0 - k0 + math.log1p(k0)


def F3(k0: float) -> float:
    return -2.0 * k0 + k0 * k0 / 2.0 + 3.0 * math.log1p(k0) - k0 / (1.0 + k0)


@dataclass(frozen=True)
class RestFrameClosedForms:
    alpha: float
    k0: float
    F1: float
    F2: float
    F3: float
    E_W: float
    K2: float
    K3: float
    E_var: float
    K3_wick: float
    E_var_wick: float


def closed_forms(alpha: float, k0: float) -> RestFrameClosedForms:
    """Evaluate every rest-frame closed form at ``(alpha, k0)``."""
    if not alpha >= 0:
        raise DomainError("alpha must be >= 0")
    if not k0 > 0:
        raise DomainError("k0 must be > 0")
    f1, f2, f3 = F1(k0), F2(k0), F3(k0)
    pi = math.pi
    E_W = -(2.0 * alpha / pi) * math.log1p(k0)
    K2 = 8.0 * alpha**2 / (3.0 * pi**2) * f1**2
    cubic = 64.0 * alpha**3 / (9.0 * pi**3) * f1**3
    K3 = 16.0 * alpha**2 / (3.0 * pi**2) * (f1 * f2 + f1 * f3) + cubic
    K3_wick = 16.0 * alpha**2 / (3.0 * pi**2) * f1 * f2 + cubic
    return RestFrameClosedForms(
        alpha=alpha,
        k0=k0,
        F1=f1,
        F2=f2,
        F3=f3,
        E_W=E_W,
        K2=K2,
        K3=K3,
        E_var=second_order_closed_form(E_W, K2, K3),
        K3_wick=K3_wick,
        E_var_wick=second_order_closed_form(E_W, K2, K3_wick),
    )


def lower_bound_small(alpha: float, k0: float, warn: bool = False) -> float:
    """Weak-coupling lower bound ``-(2 alpha/pi) ln(k0 + 1)``.

    Algebraically the same expression as ``E_W``.
    """
    if warn and alpha >= 1:
        warnings.warn(f"small-coupling bound used at alpha={alpha}", OutOfRegimeWarning, stacklevel=2)
    return -(2.0 * alpha / math.pi) * math.log1p(k0)


def lower_bound_large(alpha: float, k0: float, warn: bool = False) -> float:
    """Strong-coupling lower bound ``-alpha^2/3 - (4 alpha/pi) ln(k0/alpha)``."""
    if not alpha > 0:
        raise DomainError("lower_bound_large needs alpha > 0")
    if warn and not (1 < alpha < k0):
        warnings.warn(
            f"large-coupling bound used outside 1 << alpha << k0 (alpha={alpha}, k0={k0})",
            OutOfRegimeWarning,
            stacklevel=2,
        )
    return -(alpha**2) / 3.0 - (4.0 * alpha / math.pi) * math.log(k0 / alpha)
