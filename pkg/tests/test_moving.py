import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

import piezopolaron.moving as mv
from piezopolaron.errors import ConvergenceError, DomainError, RegimeError
from piezopolaron.model import FChoice, ModelParams, build_hamiltonian
from piezopolaron.moving import angular_moment, effective_mass, moving_bound, solve_eta
from piezopolaron.reference import closed_forms
from piezopolaron.wick import Measure, Mode, mean_energy

ALPHA, K0 = 0.5, 150.0


def _sum_V2(g, alpha, k0):
    """sum_k V_k^2 g(k, u) = (alpha/pi) int k dk int du g, by 2-D quadrature."""
    val, _ = integrate.dblquad(lambda u, k: k * g(k, u), 0.0, k0, -1.0, 1.0, epsabs=1e-13, epsrel=1e-12)
    return alpha / math.pi * val


def _eta_residual(eta, alpha, k0, P):
    D = lambda k, u: k + k * k - 2 * k * P * u * (1 - eta)  # noqa: E731
    return eta * P * P - _sum_V2(lambda k, u: k * P * u / D(k, u) ** 2, alpha, k0)


@pytest.mark.parametrize("j,p", [(0, 1), (0, 2), (1, 2), (2, 1), (2, 2), (3, 2)])
@pytest.mark.parametrize("A,B", [(1.0, 0.01), (1.0, 0.2), (1.0, 0.6), (3.0, 2.9), (151.0, 0.4)])
def test_angular_moment_against_quadrature(j, p, A, B):
    with mpmath.workdps(30):
        ref = float(mpmath.quad(lambda u: u**j / (A - B * u) ** p, [-1, 0, 1]))
    assert angular_moment(j, p, A, B) == pytest.approx(ref, rel=1e-12)


def test_angular_moment_drop_leading():
    A, B = 2.0, 0.9
    full = angular_moment(0, 1, A, B)
    assert angular_moment(0, 1, A, B, start=1) == pytest.approx(full - 2 / A, rel=1e-12)
    with pytest.raises(RegimeError):
        angular_moment(0, 1, 1.0, 1.0)


def test_eta_rest_and_zero_coupling():
    for choice in FChoice:
        s = solve_eta(ALPHA, K0, 0.0, choice)
        assert (s.eta, s.residual, s.iterations, s.converged) == (0.0, 0.0, 0, True)
        assert solve_eta(0.0, K0, 0.2, choice).eta == 0.0


def test_eta_grid_scan_oracle():
    P = 0.1
    sol = solve_eta(ALPHA, K0, P, "pshifted")
    assert sol.converged and 0 < sol.eta < 1
    grid = np.linspace(0.0, 0.5, 26)
    vals = [_eta_residual(e, ALPHA, K0, P) for e in grid]
    idx = [i for i in range(len(grid) - 1) if vals[i] * vals[i + 1] < 0]
    assert len(idx) == 1
    lo, hi = grid[idx[0]], grid[idx[0] + 1]
    root = optimize.brentq(_eta_residual, lo, hi, args=(ALPHA, K0, P), xtol=1e-13)
    assert sol.eta == pytest.approx(root, abs=1e-9)


def test_eta_small_momentum_limit():
    # eta -> c/(1+c), c = (4 alpha/3 pi)(1 - (1+k0)^-2), as P -> 0+
    c = 4 * ALPHA / (3 * math.pi) * (1 - (1 + K0) ** -2)
    assert solve_eta(ALPHA, K0, 1e-3, "pshifted").eta == pytest.approx(c / (1 + c), rel=1e-5)


def test_eta_smooth_in_momentum():
    # eta = eta0 + c P^2 + ...: the P^2 slope is stable under step halving
    def slope(h):
        e1 = solve_eta(ALPHA, K0, h, "pshifted", tol=1e-15).eta
        e2 = solve_eta(ALPHA, K0, 2 * h, "pshifted", tol=1e-15).eta
        return (e2 - e1) / (3 * h * h)

    s1, s2 = slope(0.04), slope(0.02)
    assert s2 == pytest.approx(s1, rel=1e-2)


def test_resbound_against_direct_quadrature():
    P = 0.1
    b = moving_bound(ALPHA, K0, P, "pshifted")
    eta = b.eta.eta
    D = lambda k, u: k + k * k - 2 * k * P * u * (1 - eta)  # noqa: E731
    direct = P * P * (1 - eta) ** 2 - _sum_V2(lambda k, u: (k + k * k - 4 * k * P * u * (1 - eta)) / D(k, u) ** 2, ALPHA, K0)
    assert b.energy == pytest.approx(direct, rel=1e-9)


def _mode_grid(k0, nk=48, nu=24):
    # composite Gauss-Legendre in k on geometric panels, Gauss in u, one azimuth
    edges = np.concatenate([[0.0], np.geomspace(1e-3, k0, 13)])
    xk, wk = np.polynomial.legendre.leggauss(nk // 4)
    xu, wu = np.polynomial.legendre.leggauss(nu)
    modes = []
    for a, bnd in zip(edges[:-1], edges[1:]):
        for x, w in zip(xk, wk):
            k = 0.5 * (bnd - a) * (x + 1) + a
            dk = 0.5 * (bnd - a) * w
            for u, du in zip(xu, wu):
                s = math.sqrt(1 - u * u)
                modes.append(Mode((k * s, 0.0, k * u), 2 * math.pi * k * k * dk * du))
    return modes


def test_resbound_is_mean_of_term_list_at_fixed_point():
    # the eta-substituted operator's vacuum mean reproduces the bound only at self-consistency
    P = 0.15
    b = moving_bound(ALPHA, 20.0, P, "pshifted")
    terms = build_hamiltonian(ModelParams(ALPHA, 20.0, P, "pshifted"), eta=b.eta.eta)
    mean = mean_energy(terms, Measure.discrete(_mode_grid(20.0)))(ALPHA)
    assert mean == pytest.approx(b.energy, rel=1e-7)


def test_linear_eliminating_against_direct_quadrature():
    P = 0.1
    b = moving_bound(ALPHA, K0, P, "linear-eliminating")
    eta = b.eta.eta
    G0 = lambda k, u: 1 / (k + k * k - 2 * k * P * u)  # noqa: E731
    shift = P * P * (1 + eta**2) - _sum_V2(G0, ALPHA, K0)
    drag, _ = integrate.dblquad(
        lambda u, k: k * k * 4 * eta**2 * (k * P * u) ** 2 * G0(k, u), 0, K0, -1, 1, epsabs=1e-10, epsrel=1e-12
    )
    assert b.energy == pytest.approx(shift + drag / (4 * math.pi**2), rel=1e-9)
    # and eta solves its quadratic
    c0, c1, c2 = mv._linear_coefficients(ALPHA, K0, P)
    assert c0 + c1 * eta + c2 * eta**2 == pytest.approx(eta * P * P, rel=1e-9)


def test_drag_coefficients_agree_at_weak_coupling():
    P = 0.1
    a = 1e-10
    ps = solve_eta(a, K0, P, "pshifted").eta / a
    le = solve_eta(a, K0, P, "linear-eliminating").eta / a
    assert le == pytest.approx(ps, rel=1e-3)


@pytest.mark.parametrize("choice", list(FChoice))
def test_rest_value_is_E_W(choice):
    assert moving_bound(ALPHA, K0, 0.0, choice).energy == pytest.approx(closed_forms(ALPHA, K0).E_W, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(
    v=st.tuples(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2)),
    choice=st.sampled_from(list(FChoice)),
)
def test_property_parity(v, choice):
    a = moving_bound(ALPHA, K0, v, choice).energy
    b = moving_bound(ALPHA, K0, tuple(-x for x in v), choice).energy
    assert abs(a - b) <= 1e-12


def test_rotation_invariance():
    a = moving_bound(ALPHA, K0, (0.0, 0.0, 0.2), "pshifted").energy
    b = moving_bound(ALPHA, K0, (0.12, -0.16, 0.0), "pshifted").energy
    assert a == b


def test_drag_lowers_kinetic_rise():
    P = 0.1
    E = moving_bound(ALPHA, K0, P, "pshifted").energy
    E_W = closed_forms(ALPHA, K0).E_W
    assert E < E_W + P * P
    # consistent with the small-P quadratic fit
    fit = effective_mass(ALPHA, K0, "pshifted")
    assert E == pytest.approx(fit.E0 + P * P / (2 * fit.m_eff), rel=1e-4)


def test_simple_choice_is_free_shift():
    E_W = closed_forms(ALPHA, K0).E_W
    assert moving_bound(ALPHA, K0, 0.3, "simple").energy == pytest.approx(E_W + 0.09, rel=1e-14)
    assert effective_mass(ALPHA, K0, "simple").m_eff == pytest.approx(0.5, rel=1e-9)


def test_regime_errors():
    with pytest.raises(RegimeError):
        solve_eta(1e-3, K0, 0.6, "pshifted")
    with pytest.raises(RegimeError):
        moving_bound(ALPHA, K0, 0.5, "linear-eliminating")
    with pytest.raises(RegimeError):
        effective_mass(ALPHA, K0, "pshifted", h=0.3)


def test_convergence_error(monkeypatch):
    monkeypatch.setattr(mv, "MAX_ITER", 1)
    with pytest.raises(ConvergenceError) as exc:
        solve_eta(ALPHA, K0, 0.3, "pshifted")
    assert exc.value.residual is not None


def test_domain_errors():
    with pytest.raises(DomainError):
        solve_eta(-1.0, K0, 0.1)
    with pytest.raises(DomainError):
        effective_mass(ALPHA, K0, h=0.0)
    with pytest.raises(DomainError):
        effective_mass(ALPHA, K0, "pshifted", order=2)


@pytest.mark.parametrize("choice", list(FChoice))
def test_free_electron_mass(choice):
    assert effective_mass(0.0, K0, choice).m_eff == pytest.approx(0.5, abs=1e-9)


def test_mass_increases_with_coupling():
    masses = [effective_mass(a, K0, "pshifted").m_eff for a in (0.1, 0.5, 1.0, 2.0)]
    assert all(b > a for a, b in zip(masses, masses[1:]))
    assert masses[0] > 0.5


@pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0])
def test_fit_residual_small(alpha):
    r = effective_mass(alpha, K0, "pshifted")
    assert r.fit_residual < 1e-6 * abs(r.E0)


def test_second_order_mass_via_moments():
    r1 = effective_mass(1.0, K0, "simple")
    r2 = effective_mass(1.0, K0, "simple", order=2)
    assert r2.E0 < r1.E0
    assert r2.m_eff > 0.5
