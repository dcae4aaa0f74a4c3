"""Acceptance criteria, one recorded pass/fail line each (see the terminal summary)."""
import math
import random
import time

import numpy as np
import pytest

from piezopolaron.bounds import MONOTONE_SLACK, bound_sequence, second_order_closed_form, solve_bound
from piezopolaron.cli import main
from piezopolaron.fock import fock_oracle
from piezopolaron.model import FChoice, ModelParams, build_hamiltonian
from piezopolaron.moving import effective_mass, moving_bound, solve_eta
from piezopolaron.radint import J, RadialIntegralKey, quadrature_oracle, radial_integral
from piezopolaron.reference import F1, F2, F3, closed_forms, lower_bound_large
from piezopolaron.validation import exact_moments, random_discrete_case, random_symmetric_case
from piezopolaron.wick import Measure, central_moment, mean_energy, moment_vector, vacuum_moment

GRID_1 = [(0.1, 150.0), (1.0, 150.0), (5.0, 150.0), (1.0, 1.0)]
GRID_2 = [(0.5, 10.0), (1.0, 150.0), (5.0, 150.0)]


def rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_1_first_order(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for alpha, k0 in GRID_1:
        terms = build_hamiltonian(ModelParams(1.0, k0))
        M1 = vacuum_moment(terms, Measure.continuum(k0), 1)(alpha)
        worst = max(worst, rel(M1, -(2 * alpha / math.pi) * math.log1p(k0)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 1.0
    criterion(1, ok, f"max rel err {worst:.1e}, {dt:.2f} s (tol 1e-12, < 1 s)")
    assert ok


@pytest.fixture(scope="module")
def second_order_data():
    t0 = time.perf_counter()
    out = []
    by_k0 = {}
    for alpha, k0 in GRID_2:
        if k0 not in by_k0:
            terms = build_hamiltonian(ModelParams(1.0, k0))
            measure = Measure.continuum(k0)
            by_k0[k0] = (
                mean_energy(terms, measure),
                [central_moment(terms, measure, m) for m in (2, 3, 4)],
            )
        mean_p, (K2p, K3p, K4p) = by_k0[k0]
        mean, K2, K3, K4 = mean_p(alpha), K2p(alpha), K3p(alpha), K4p(alpha)
        moments = [1.0, mean, K2 + mean**2, K3 + 3 * mean * K2 + mean**3,
                   K4 + 4 * mean * K3 + 6 * mean**2 * K2 + mean**4]
        out.append((alpha, k0, closed_forms(alpha, k0), K2, K3, solve_bound(moments, 2).bound, mean))
    return out, time.perf_counter() - t0


@pytest.mark.xfail(
    strict=True,
    reason="the two-recoil third-moment closed form carries an extra "
    "(16 alpha^2/3 pi^2) F1 F3; exhaustive Wick pairing of the same operator "
    "(cross-checked against truncated Fock space and the untransformed "
    "momentum-frame operator) gives (16 alpha^2/3 pi^2) F1 F2 + (64 alpha^3/9 pi^3) F1^3",
)
def test_criterion_2_second_order_against_two_recoil_forms(second_order_data, criterion):
    data, dt = second_order_data
    e_K2 = max(rel(K2, ref.K2) for _, _, ref, K2, _, _, _ in data)
    e_K3 = max(rel(K3, ref.K3) for _, _, ref, _, K3, _, _ in data)
    e_SO = max(rel(b, ref.E_var) for _, _, ref, _, _, b, _ in data)
    ok = e_K2 <= 1e-10 and e_K3 <= 1e-10 and e_SO <= 1e-9 and dt < 10
    criterion(
        2,
        ok,
        f"K2 rel err {e_K2:.1e}; K3 vs two-recoil closed form rel diff {e_K3:.3f}; "
        f"n=2 bound vs its closed form rel diff {e_SO:.1e}; {dt:.1f} s",
    )
    assert ok


def test_criterion_2_pipeline_self_consistency(second_order_data):
    # the same engine moments satisfy the closed-form identities with the recoil block counted once
    data, dt = second_order_data
    for alpha, k0, ref, K2, K3, b, mean in data:
        assert rel(K2, ref.K2) <= 1e-10
        assert rel(K3, ref.K3_wick) <= 1e-10
        assert rel(b, second_order_closed_form(mean, K2, K3)) <= 1e-9
        assert rel(b, ref.E_var_wick) <= 1e-9
    assert dt < 10


def test_criterion_3_radial_integrals(criterion):
    e_F = 0.0
    for k0 in (0.1, 1.0, 150.0):
        e_F = max(e_F, rel(F1(k0), J(3, 2, k0)), rel(F2(k0), J(3, 1, k0)), rel(F3(k0), J(5, 2, k0)))
    e_Q = 0.0
    count = 0
    for k0 in (0.1, 1.0, 150.0):
        for p in range(13):
            for q in range(7):
                if p - q <= -1:
                    continue
                key = RadialIntegralKey(p, q, k0)
                e_Q = max(e_Q, rel(radial_integral(key), quadrature_oracle(key)))
                count += 1
    ok = e_F <= 1e-12 and e_Q <= 1e-10
    criterion(3, ok, f"F identities max rel err {e_F:.1e}; {count} integrals vs quadrature max rel err {e_Q:.1e}")
    assert ok


def test_criterion_4_solver(criterion):
    t0 = time.perf_counter()
    rng = random.Random(4)
    margin, rise = math.inf, -math.inf
    trials = 210
    for t in range(trials):
        size = 4 + t % 7
        H, v = random_symmetric_case(rng, size)
        lam = float(np.linalg.eigvalsh(np.array(H, dtype=float))[0])
        seq = bound_sequence(exact_moments(H, v, 9), 4)
        margin = min(margin, min(r.bound - lam for r in seq))
        rise = max(rise, max(b.bound - a.bound for a, b in zip(seq, seq[1:])))
    two = solve_bound([1, 1, 2, 4, 8], 2).bound
    dt = time.perf_counter() - t0
    ok = margin >= -1e-9 and rise <= MONOTONE_SLACK and abs(two) <= 1e-12 and dt < 30
    criterion(4, ok, f"{trials} matrices: min(bound - lambda_min) {margin:.1e}, max rise {rise:.1e}; two-level {two:.1e}; {dt:.1f} s")
    assert ok


def test_criterion_5_wick_vs_fock(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    cases = 24
    for seed in range(cases):
        terms, measure, alpha = random_discrete_case(random.Random(5000 + seed))
        assert len(measure.modes) <= 3
        for m in range(1, 5):
            w = vacuum_moment(terms, measure, m)(alpha)
            f = fock_oracle(terms, measure, m, alpha=alpha)
            worst = max(worst, abs(w - f) / max(abs(f), 1.0))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 60
    criterion(5, ok, f"{cases} random Hamiltonians, m <= 4: max rel err {worst:.1e}; {dt:.1f} s")
    assert ok


@pytest.mark.slow
def test_criterion_6_third_order_at_rest(criterion):
    t0 = time.perf_counter()
    terms = build_hamiltonian(ModelParams(1.0, 150.0))
    measure = Measure.continuum(150.0)
    central = moment_vector(terms, measure, 3, centered=True)
    mean = mean_energy(terms, measure)
    details, ok = [], True
    for alpha in (1.0, 5.0):
        seq = bound_sequence(central.at(alpha), 3, mean=mean.evaluate_mp(alpha))
        exists = len(seq) == 3
        ok &= exists and seq[2].bound <= seq[1].bound + 1e-9
        details.append(f"alpha={alpha:g}: " + ", ".join(f"{r.bound:.6f}" for r in seq))
    dt = time.perf_counter() - t0
    ok &= dt < 600
    criterion(6, ok, "; ".join(details) + f"; {dt:.1f} s")
    assert ok


def test_criterion_7_moving(criterion):
    t0 = time.perf_counter()
    alpha, k0 = 0.5, 150.0
    E_W = closed_forms(alpha, k0).E_W
    eta0 = all(solve_eta(alpha, k0, 0.0, c).eta == 0.0 for c in FChoice)
    e_rest = max(rel(moving_bound(alpha, k0, 0.0, c).energy, E_W) for c in FChoice)
    parity = 0.0
    for c in FChoice:
        for P in [(0.0, 0.0, 0.1), (0.05, -0.1, 0.2)]:
            a = moving_bound(alpha, k0, P, c).energy
            b = moving_bound(alpha, k0, tuple(-x for x in P), c).energy
            parity = max(parity, abs(a - b))
    m0 = max(abs(effective_mass(0.0, k0, c).m_eff - 0.5) for c in FChoice)
    dt = time.perf_counter() - t0
    ok = eta0 and e_rest <= 1e-12 and parity <= 1e-12 and m0 <= 1e-9 and dt < 30
    criterion(7, ok, f"eta(0)=0 {eta0}; rest rel err {e_rest:.1e}; parity {parity:.1e}; |m_eff(0)-1/2| {m0:.1e}; {dt:.1f} s")
    assert ok


def test_criterion_8_figures(tmp_path, criterion):
    out = tmp_path / "figs"
    code = main(["figures", "--out", str(out), "--figure1-alpha", "1:140:30"])
    below_W, lbl_below = True, True
    tables = 0
    for i in (1, 2, 3):
        lines = (out / f"figure{i}.csv").read_text().splitlines()
        assert "k0=150.0" in lines[0]
        cols = lines[1].split(",")
        rows = [dict(zip(cols, map(float, l.split(",")))) for l in lines[2:]]
        assert {"E_var", "E_LBS", "E_LBL"} <= set(cols)
        tables += 1
        for r in rows:
            below_W &= r["E_var"] <= r["E_W"]
            if r["alpha"] >= 10:
                lbl_below &= r["E_LBL"] < r["E_var"]
    ok = code == 0 and tables == 3 and below_W and lbl_below
    criterion(8, ok, f"{tables} tables; E_var <= E_W everywhere {below_W}; E_LBL < E_var for alpha >= 10 {lbl_below}")
    assert ok


def test_criterion_9_determinism(tmp_path, criterion):
    v1, v8 = tmp_path / "v1.txt", tmp_path / "v8.txt"
    c1 = main(["validate", "--workers", "1", "--out", str(v1)])
    c8 = main(["validate", "--workers", "8", "--out", str(v8)])
    f1, f8 = tmp_path / "f1", tmp_path / "f8"
    main(["figures", "--workers", "1", "--out", str(f1)])
    main(["figures", "--workers", "8", "--out", str(f8)])
    same_v = v1.read_bytes() == v8.read_bytes()
    same_f = all((f1 / n).read_bytes() == (f8 / n).read_bytes() for n in ("figure1.csv", "figure2.csv", "figure3.csv"))
    ok = same_v and same_f and c1 == c8 == 0
    criterion(9, ok, f"validate identical {same_v} (exit {c1}/{c8}); figures identical {same_f}")
    assert ok
