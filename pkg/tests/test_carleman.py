import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sphgrushin.carleman import (admissibility_constants, build_beta, carleman_diagnostic,
                                 carleman_ratio, con_constants, kernel_bounds_check, kernel_eval,
                                 make_params, mode_solution, phi_eval, search_beta_constants,
                                 split_identity_check, splitting_product, theta_eval,
                                 theta_inequalities_check)
from sphgrushin.numerics import derivatives, make_latitude_rule, make_time_grid

W = build_beta(0.6, 1.2, 0.8, 1.0, 7.0, 12.0, 10.0)


def test_closed_forms_on_explicit_pieces():
    x = np.linspace(-0.8, 0.8, 101)
    assert np.allclose(W(x), np.log(np.cos(x)) - x * x / 2 + 10 * (x + 1), atol=1e-14)
    xc = np.concatenate([np.linspace(-1.57, -1.0, 50), np.linspace(1.0, 1.57, 50)])
    assert np.allclose(W(xc), np.log(np.abs(np.sin(xc))) + 7 * np.abs(xc) + 12, atol=1e-13)
    assert W(0.0) == 10.0
    assert W.derivative(0.0, 1) == 10.0


def test_measured_constants():
    # min of cot x + A1 on the caps is A1 at the pole; min of -tan x - x + A3 is at a'
    assert abs(W.eta1 - 7.0) < 1e-9
    assert abs(W.eta2 - (10 - math.tan(0.8) - 0.8)) < 1e-12
    inv = W.invariants(10001)
    assert inv["beta_ge_1"] and inv["eta1_grid"] > 0 and inv["eta2_grid"] > 0
    assert inv["junction_mismatch"] < 1e-6
    assert W.betaMin >= 1 and W.betaMax > W.betaMin


def test_c4_by_finite_differences():
    # away from the junctions each derivative matches a centred difference of the one below
    h = 1e-6
    x = np.array([-1.3, -0.95, -0.9, -0.85, -0.3, 0.0, 0.5, 0.85, 0.9, 0.95, 1.4])
    for k in range(1, 5):
        fd = (W.derivative(x + h, k - 1) - W.derivative(x - h, k - 1)) / (2 * h)
        got = W.derivative(x, k)
        assert np.all(np.abs(fd - got) < 1e-4 * (1 + np.abs(got)))
    with pytest.raises(ValueError):
        W.derivative(0.1, 5)


def test_c4_one_sided_limits_at_junctions():
    # the connector blend has a very large fifth derivative, so one-sided
    # values only meet as the offset shrinks
    for x0 in (-1.0, -0.8, 0.8, 1.0):
        for k in range(5):
            gaps = [abs(W.derivative(x0 + d, k) - W.derivative(x0 - d, k)) for d in (1e-9, 1e-11, 1e-13)]
            assert gaps[-1] < 1e-3 * (1 + abs(W.derivative(x0, k)))
            assert gaps[-1] <= gaps[0]


def test_build_errors():
    with pytest.raises(ValueError):
        build_beta(0.6, 1.2, 1.0, 0.8, 7, 12, 10)
    with pytest.raises(ValueError):
        build_beta(0.6, 1.2, 0.8, 1.0, 1, 1, 1)
    with pytest.raises(ValueError):
        build_beta(0.6, 1.2, 0.8, 1.0, 7, -1, 10)


def test_grid_search_recovers_defaults():
    best, table = search_beta_constants(0.6, 1.2, 0.8, 1.0, [6, 7, 8], [11, 12, 13], [9, 10, 11])
    assert best == (7.0, 12.0, 10.0)
    assert min(r[3] for r in table) == [r[3] for r in table if r[:3] == best][0]


def test_theta_examples():
    th, d1, d2 = theta_eval(np.array([1.0]), 2.0)
    assert th[0] == 1.0 and d1[0] == 0.0 and d2[0] == 2.0
    for T in (0.5, 3.0):
        th, _, d2 = theta_eval(np.array([T / 2]), T)
        assert abs(th[0] - 4 / T ** 2) < 1e-15
        assert abs(th[0] - T ** 4 * th[0] ** 3 / 16) < 1e-12 * th[0]
        assert abs(d2[0] - 2 * th[0] ** 2) < 1e-12 * d2[0]
    with pytest.raises(ValueError):
        theta_eval(np.array([0.0]), 1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 100.0))
def test_theta_inequalities(T):
    t = np.concatenate([[1e-6 * T], np.linspace(1e-3 * T, (1 - 1e-3) * T, 1000), [(1 - 1e-6) * T]])
    assert theta_inequalities_check(T, t)["ok"]


def test_phi():
    s, T = 3.0, 2.0
    assert abs(phi_eval(1.0, W.argMin, s, T, W) - s * W.betaMin) < 1e-12
    vals = [phi_eval(10.0 ** -k, 0.3, s, T, W) for k in range(1, 7)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    grid = phi_eval(np.array([0.5, 1.0]), np.array([0.0, 0.3, 1.2]), s, T, W)
    assert grid.shape == (2, 3)


def test_admissibility_constant_formulas():
    w = build_beta(0.6, 1.2, math.pi / 4, 1.0, 7.0, 12.0, 10.0, check=False)
    assert abs(admissibility_constants(w).C4 - math.pi / 2) < 1e-12
    w = build_beta(0.6, math.pi / 2, 0.8, math.pi / 2 - 1e-9, 7.0, 12.0, 10.0, check=False)
    assert abs(admissibility_constants(w).C5 - 1.0) < 1e-12
    ac = admissibility_constants(W)
    assert ac.R0 == max(ac.s1, ac.s2)
    assert abs(ac.Tstar - 13.5 * ac.R0 * W.betaMax) < 1e-9
    assert abs(ac.Tstar_betaMin - 13.5 * ac.R0 * W.betaMin) < 1e-9
    cc = con_constants(W, ac.R0)
    assert cc["C12"] > 0 and cc["C12_swapped"] > 0 and cc["C9"] > 0


def test_params():
    p = make_params(W, 1.0, 3)
    assert p.admissible and abs(p.s - p.R0 * 3) < 1e-12
    p2 = make_params(W, 0.5, 1, sFactor=2.0)
    assert abs(p2.s - 2 * p2.R0 * 0.75) < 1e-12
    assert not make_params(W, 1.0, 3, sFactor=0.5).admissible
    with pytest.raises(ValueError):
        make_params(W, 1.0, 0)


def test_split_identity_spectral_solutions():
    for n, ell in [(1, 1), (2, 4), (3, 5), (6, 8)]:
        sol = mode_solution(n, [ell, ell + 1], [1.0, -0.4])
        p = make_params(W, 1.0, n)
        assert split_identity_check(sol, p.s, 1.0, W) < 1e-5
        # s = 0: no weight, identity reduces to P g
        assert split_identity_check(sol, 0.0, 1.0, W) < 1e-13


def test_split_identity_with_numerical_second_derivative():
    sol = mode_solution(2, [2, 5], [1.0, 0.7])
    x = make_latitude_rule(120, kind="legendre-x")
    t = make_time_grid(1.0, 10, clearance=0.0, points_per_panel=4).nodes
    g = sol.evaluate(t, x.nodes)[0]
    gxx = np.array([derivatives(row, x, cos_power=2.5)[1] for row in g])
    p = make_params(W, 1.0, 2)
    assert split_identity_check(sol, p.s, 1.0, W, t=t, x=x.nodes, gxx_spectral=gxx) < 1e-5


def test_kernel_examples():
    s, th = 5.0, 2.0
    # band at x = 0: coefficient of z_x^2 is 4 s theta
    for form in ("general", "literal"):
        k = kernel_eval(np.array([0.0]), np.array([0.0]), np.array([1.0]), s, th, 0.1, 0.3, W, 2, form)
        assert abs(k[0] - 4 * s * th) < 1e-12
        zero = kernel_eval(np.linspace(-1.5, 1.5, 31), 0.0 * np.ones(31), np.zeros(31),
                           s, th, 0.1, 0.3, W, 2, form)
        assert np.all(zero == 0)
    with pytest.raises(ValueError):
        kernel_eval(0.0, 1.0, 1.0, s, th, 0.1, 0.3, W, 2, form="other")


def test_literal_matches_general_off_band_only():
    rng = np.random.default_rng(12)
    x = np.linspace(-1.55, 1.55, 301)
    z, zx = rng.standard_normal(301), rng.standard_normal(301)
    args = (x, z, zx, 1.0, 1.0, 0.7, 5.0, W, 3)
    gen = kernel_eval(*args, form="general")
    lit = kernel_eval(*args, form="literal")
    reg = W.region(x)
    off = reg != 0
    assert np.all(np.abs(gen[off] - lit[off]) <= 1e-9 * (1 + np.abs(gen[off])))
    band = reg == 0
    assert np.max(np.abs(gen[band] - lit[band]) / (1 + np.abs(gen[band]))) > 1e-3


def test_product_equals_integrated_kernels():
    sol = mode_solution(3, [3, 5], [1.0, 0.5])
    p = make_params(W, 1.0, 3)
    r = splitting_product(sol, p.s, 1.0, W)
    assert r["rel_diff"] < 1e-8


def test_kernel_bounds():
    for n in (1, 3, 6):
        sol = mode_solution(n, [n, n + 2], [1.0, 0.5])
        r1 = kernel_bounds_check(sol, make_params(W, 1.0, n), W)
        assert r1["ok"]
        r2 = kernel_bounds_check(sol, make_params(W, 1.0, n, sFactor=2.0), W)
        assert r2["ok"]
        assert r2["con"]["margin"] > r1["con"]["margin"]
        assert kernel_bounds_check(sol, make_params(W, 1.0, n), W, swapped_c12=True)["ok"]
    zero = mode_solution(2, [2], [0.0])
    r = kernel_bounds_check(zero, make_params(W, 1.0, 2), W)
    assert all(r[k]["margin"] == 0.0 for k in ("deg", "bdy", "con"))
    with pytest.raises(ValueError):
        kernel_bounds_check(zero, make_params(W, 1.0, 2, sFactor=0.5), W)


def test_carleman_diagnostic():
    sol = mode_solution(3, [5])
    val = carleman_ratio(sol, make_params(W, 1.0, 3), W, 0.6, 1.2)
    assert np.isfinite(val)
    cal = [mode_solution(n, [n + 1]) for n in (1, 2, 3)]
    held = [mode_solution(n, [n, n + 2], [1.0, 0.3]) for n in range(1, 7)]
    d = carleman_diagnostic(cal, held, W, 0.6, 1.2, 1.0)
    assert d["ok"] and len(d["held_out"]) == 6
    with pytest.raises(ValueError):
        carleman_diagnostic([], held, W, 0.6, 1.2, 1.0)
