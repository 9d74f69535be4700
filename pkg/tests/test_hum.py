import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sphgrushin.hum import (assemble_control_2d, control_trajectory, cost_at_reduction, hum_gramian,
                            masking_error, panel_values, solve_mode_control)
from sphgrushin.legendre import mode_basis
from sphgrushin.numerics import make_latitude_rule, make_time_grid
from sphgrushin.observability import (ControlRegion, brute_force_observed_energy,
                                      observability_gramian, spatial_overlap_matrix)
from sphgrushin.spectral import Field2D, ModeState, duhamel_evolve, duhamel_mode

RULE = make_latitude_rule(64)
REG = ControlRegion(0.6, 1.2)


def test_duality_with_observability():
    for n in (0, 3, 7):
        b = mode_basis(n, 20, RULE)
        for T in (0.3, 1.0):
            G = hum_gramian(b, REG, T)
            assert np.abs(G - observability_gramian(b, REG, T)).max() <= 1e-12
            assert np.linalg.eigvalsh(G).min() > -1e-12
    b = mode_basis(0, 5, RULE)
    S = spatial_overlap_matrix(b, REG)
    assert hum_gramian(b, REG, 2.0)[0, 0] == S[0, 0] * 2.0
    with pytest.raises(ValueError):
        hum_gramian(b, REG, 0.0)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 4), st.integers(0, 2**31))
def test_energy_identity(n, seed):
    b = mode_basis(n, 12, RULE)
    p = np.random.default_rng(seed).standard_normal(b.size)
    T = 0.8
    # the adjoint run backward from p is the forward flow of p in tau = T - t
    ref = brute_force_observed_energy(b, REG, T, p)
    assert abs(p @ hum_gramian(b, REG, T) @ p - ref) < 1e-8 * ref


def test_zero_data():
    b = mode_basis(2, 15, RULE)
    h = solve_mode_control(ModeState(2, np.zeros(b.size), b), REG, 1.0, 1e-4)
    assert np.all(h.p == 0) and np.all(h.control.values == 0) and h.final_norm == 0.0
    with pytest.raises(ValueError):
        solve_mode_control(ModeState(2, np.zeros(b.size), b), REG, 1.0, 0.0)


def test_convergence_and_simulation():
    b0 = mode_basis(0, 20, RULE)
    b1 = mode_basis(1, 20, RULE)
    for f0 in (ModeState.unit(b0, 0), ModeState.unit(b1, 3)):
        norms = []
        for eps in (1e-2, 1e-4, 1e-6):
            h = solve_mode_control(f0, REG, 1.0, eps)
            sim = duhamel_mode(f0, h.control, 1.0).coeffs
            assert np.linalg.norm(sim - h.predicted_final) <= 1e-8 * np.linalg.norm(h.free_final)
            norms.append(h.final_norm)
        assert norms[0] / norms[1] >= 3 and norms[1] / norms[2] >= 3


def test_epsilon_monotone():
    rng = np.random.default_rng(31)
    for n in (0, 2, 5):
        b = mode_basis(n, 16, RULE)
        f0 = ModeState(n, rng.standard_normal(b.size), b)
        norms = [solve_mode_control(f0, REG, 0.7, 10.0 ** -k).final_norm for k in range(1, 10)]
        assert all(y <= x * (1 + 1e-12) for x, y in zip(norms, norms[1:]))


def test_panel_values_reproduce_trajectory_average():
    b = mode_basis(1, 10, RULE)
    S = spatial_overlap_matrix(b, REG)
    p = np.random.default_rng(4).standard_normal(b.size)
    T = 1.0
    edges = np.linspace(0, T, 5)
    vals = panel_values(p, b, S, T, edges)
    # kernel-weighted average on panel 0 by brute force
    tg = make_time_grid(T, 1, interval=(edges[0], edges[1]), points_per_panel=20)
    u = control_trajectory(p, b, S, T, tg.nodes)
    k = np.exp(-np.outer(T - tg.nodes, b.eigenvalues))
    ref = (tg.weights[:, None] * k * u).sum(axis=0) / (tg.weights[:, None] * k).sum(axis=0)
    assert np.abs(vals[0] - ref).max() < 1e-12 * np.abs(ref).max()


def test_masking_error_small_for_wide_truncation():
    b = mode_basis(0, 30, RULE)
    S = spatial_overlap_matrix(b, REG)
    c = np.zeros(b.size)
    c[:4] = 1.0
    # the coefficients of 1_omega v are S v; masking again moves them
    assert masking_error(S @ c, b, REG) > 0
    assert masking_error(np.zeros(b.size), b, REG) == 0.0


def _field_and_controls(N=2, L=12, T=1.0, eps=1e-4):
    rng = np.random.default_rng(9)
    coeffs = {}
    for n in range(0, N + 1):
        c = rng.standard_normal(L - n + 1) + (1j * rng.standard_normal(L - n + 1) if n else 0)
        coeffs[n] = c
        if n:
            coeffs[-n] = np.conj(c)
    f = Field2D.from_coefficients(coeffs, N, L, RULE)
    per = {n: solve_mode_control(f.modes[n], REG, T, eps, steps=20).control for n in f.frequencies}
    return f, per


def test_control_2d_parseval_support_and_realness():
    f, per = _field_and_controls()
    u = assemble_control_2d(per, REG)
    ny = 16
    y = 2 * np.pi * np.arange(ny) / ny
    k = 3
    dt = np.diff(u.edges)[k]
    total = 0.0
    for lo, hi in REG.pieces():
        r = make_latitude_rule(60, lo=lo, hi=hi)
        vals = u.samples(k, r.nodes, y)
        total += float(r.weights @ (np.abs(vals) ** 2).sum(axis=1)) * 2 * np.pi / ny
    per_panel = sum(float(np.real(np.conj(c.values[k]) @ spatial_overlap_matrix(c.basis, REG) @ c.values[k]))
                    for c in per.values())
    assert abs(total - per_panel) < 1e-10 * per_panel
    assert u.cost() > 0 and abs(u.cost() - sum(u.mode_cost(n) for n in u.frequencies)) < 1e-12 * u.cost()
    x = np.array([-1.4, -0.3, 0.0, 0.5, 1.3])
    assert np.all(u.samples(0, x, y) == 0)
    inside = u.samples(0, np.array([0.9]), y)
    assert np.abs(inside.imag).max() < 1e-12 * np.abs(inside).max()
    fin = duhamel_evolve(f, per, 1.0)
    assert fin.norm() < 0.05 * f.evolve(1.0).norm()


def test_single_mode_control_is_longitude_independent():
    b = mode_basis(0, 10, RULE)
    h = solve_mode_control(ModeState.unit(b, 0), REG, 1.0, 1e-3, steps=5)
    u = assemble_control_2d({0: h.control}, REG)
    vals = u.samples(2, np.array([0.9, -1.0]), np.linspace(0, 6, 7))
    assert np.abs(vals - vals[:, :1]).max() < 1e-14


def test_assembly_errors():
    f, per = _field_and_controls()
    with pytest.raises(ValueError):
        assemble_control_2d({}, REG)
    with pytest.raises(ValueError):
        assemble_control_2d({5: per[1]}, REG)
    other = solve_mode_control(f.modes[0], REG, 1.0, 1e-4, steps=7).control
    with pytest.raises(ValueError):
        assemble_control_2d({0: other, 1: per[1]}, REG)


def test_minimal_time_shadow():
    reg = ControlRegion(math.pi / 3, 1.2)
    T = 0.5 * math.log(2)
    rule = make_latitude_rule(128)
    costs = {}
    for n in (10, 40):
        b = mode_basis(n, n + 20, rule)
        r = cost_at_reduction(ModeState.unit(b, n), reg, T)
        assert r["reached"]
        costs[n] = r["cost"]
    assert costs[40] >= 2 * costs[10]
