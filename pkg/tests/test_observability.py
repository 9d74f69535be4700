import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import OVERLAP, RATIO, WALLIS
from sphgrushin.legendre import mode_basis
from sphgrushin.numerics import make_latitude_rule
from sphgrushin.observability import (ControlRegion, brute_force_observed_energy,
                                      dissipation_window_bound, mintime_lower_bound, mintime_ratio,
                                      obs_constant_mode, observability_gramian, observed_energy_2d,
                                      spatial_overlap_matrix, stirling_envelope_ratio, time_factor,
                                      truncation_scan, uniform_scan, wallis_bound_check)
from sphgrushin.spectral import Field2D

RULE = make_latitude_rule(96)
REG = ControlRegion(0.6, 1.2)
PI3 = ControlRegion(math.pi / 3, 1.2)


def test_region():
    assert REG.contains(np.array([-1.0, -0.3, 0.7, 1.3])).tolist() == [True, False, True, False]
    one = ControlRegion(0.6, 1.2, both_crowns=False)
    assert one.contains(np.array([-1.0, 1.0])).tolist() == [False, True]
    with pytest.raises(ValueError):
        ControlRegion(1.2, 0.6)
    with pytest.raises(ValueError):
        ControlRegion(0.0, 1.0)


def test_overlap_against_oracle():
    for (n, l, lp), ref in OVERLAP.items():
        S = spatial_overlap_matrix(mode_basis(n, 12, RULE), REG)
        assert abs(S[l - n, lp - n] - ref) < 1e-13


def test_overlap_examples():
    S = spatial_overlap_matrix(mode_basis(0, 10, RULE), REG)
    assert abs(S[0, 0] - (math.sin(1.2) - math.sin(0.6))) < 1e-15
    assert np.linalg.eigvalsh(S).min() > -1e-12
    wide = spatial_overlap_matrix(mode_basis(2, 10, RULE), ControlRegion(1e-12, math.pi / 2))
    assert np.abs(wide - np.eye(9)).max() < 1e-10
    one = spatial_overlap_matrix(mode_basis(1, 10, RULE), ControlRegion(0.6, 1.2, both_crowns=False))
    two = spatial_overlap_matrix(mode_basis(1, 10, RULE), REG)
    deg = np.arange(1, 11)
    same = (deg[:, None] + deg[None, :]) % 2 == 0
    assert np.allclose(two[same], 2 * one[same], atol=1e-15) and np.all(two[~same] == 0)


def test_time_factor():
    th = time_factor(np.array([0.0, 1.0]), 1.0)
    assert th[0, 0] == 1.0
    assert abs(th[1, 1] - (1 - math.exp(-2)) / 2) < 1e-16
    assert abs(th[0, 1] - (1 - math.exp(-1))) < 1e-16
    with pytest.raises(ValueError):
        time_factor([0.0], 0.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 6), st.floats(0.1, 2.0), st.integers(0, 2**31))
def test_gramian_matches_brute_force(n, T, seed):
    b = mode_basis(n, 14, RULE)
    c = np.random.default_rng(seed).standard_normal(b.size)
    M = observability_gramian(b, REG, T)
    ref = brute_force_observed_energy(b, REG, T, c)
    assert abs(c @ M @ c - ref) < 1e-8 * ref
    assert np.abs(M - M.T).max() < 1e-12 * np.abs(M).max()
    assert np.linalg.eigvalsh(M).min() > -1e-12 * np.abs(M).max()


def test_obs_constant_scalar_case():
    b = mode_basis(0, 0, RULE)
    for T in (0.3, 1.0, 2.5):
        C = obs_constant_mode(b, REG, T)
        assert abs(C - 1 / (T * (math.sin(1.2) - math.sin(0.6)))) < 1e-12 * C


def test_obs_constant_decreases_in_T():
    b = mode_basis(3, 20, RULE)
    vals = [obs_constant_mode(b, REG, T) for T in (0.3, 0.6, 1.0, 1.4)]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    d = obs_constant_mode(b, REG, 1.0, details=True)
    # terminal factors below 1e-300 drop out
    assert d.effective_dim == int(np.sum(2 * b.eigenvalues * 1.0 < 300 * math.log(10))) and d.ridge > 0
    assert obs_constant_mode(b, REG, 1.0, weighted=False) > 0


def test_mintime_ratio_against_oracle():
    for (n, T), ref in RATIO.items():
        assert abs(mintime_ratio(n, T, PI3) - ref) < 1e-10 * ref
    with pytest.raises(ValueError):
        mintime_ratio(0, 0.6, PI3)


def test_ratio_decays_below_threshold():
    r = [mintime_ratio(n, 0.6, PI3) for n in (10, 20, 40, 80)]
    assert all(x > y for x, y in zip(r, r[1:]))
    logs = [math.log(mintime_ratio(n, 0.6, PI3)) for n in range(20, 101)]
    assert all(b < a for a, b in zip(logs, logs[1:]))
    one = ControlRegion(math.pi / 3, 1.2, both_crowns=False)
    assert abs(mintime_ratio(30, 0.6, PI3) / mintime_ratio(30, 0.6, one) - 2.0) < 1e-12


def test_wallis_against_oracle_and_sweep():
    for n, (lhs, rhs) in WALLIS.items():
        r = wallis_bound_check(n, 0.6, PI3)
        assert abs(r["log_lhs"] - lhs) < 1e-10 and abs(r["log_rhs"] - rhs) < 1e-10
    assert all(wallis_bound_check(n, 0.6, PI3)["holds"] for n in range(1, 101))


def test_stirling_and_threshold():
    assert abs(stirling_envelope_ratio(100) - 1) < 0.05
    vals = [abs(stirling_envelope_ratio(n) - 1) for n in (5, 20, 100, 1000)]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    t1, t2 = mintime_lower_bound(PI3)
    assert abs(t1 - math.log(2)) < 1e-12 and abs(t1 - t2) < 1e-15
    t1, t2 = mintime_lower_bound(0.7)
    assert abs(t1 - t2) < 1e-15
    assert mintime_lower_bound(1e-9)[0] < 1e-17


def test_constant_dominates_inverse_ratio():
    for T in (0.3, 0.6, 1.4):
        for n in range(1, 21):
            C = obs_constant_mode(mode_basis(n, 30, RULE), REG, T)
            assert C * mintime_ratio(n, T, REG) >= 1 - 1e-10


def test_uniform_scan_trends():
    thr = math.log(2)
    above = uniform_scan(PI3, 2 * thr, 20, 30)
    assert above.trend() == "bounded" and above.above_threshold
    below = uniform_scan(PI3, 0.5 * thr, 20, 30)
    assert below.trend() == "growing" and not below.above_threshold
    for n in range(1, 21):
        assert below.constants[n] >= 1 / below.ratios[n] * (1 - 1e-10)
    assert above.constants[0] == obs_constant_mode(mode_basis(0, 30, make_latitude_rule(100)), PI3, 2 * thr)


def test_observed_energy_assembly():
    rng = np.random.default_rng(17)
    N, L = 3, 10
    rule = make_latitude_rule(40)
    coeffs = {n: rng.standard_normal(L - abs(n) + 1) + 1j * rng.standard_normal(L - abs(n) + 1)
              for n in range(-N, N + 1)}
    f = Field2D.from_coefficients(coeffs, N, L, rule)
    T = 0.7
    per_mode = 0.0
    for n in f.frequencies:
        M = observability_gramian(f.modes[n].basis, REG, T)
        c = f.modes[n].coeffs
        per_mode += float(np.real(np.conj(c) @ M @ c))
    total = observed_energy_2d(f, REG, T)
    assert abs(total - per_mode) < 1e-10 * per_mode


def test_dissipation_window_bound():
    R0, bmax, bmin = 9.5, 23.0, 1.06
    Tstar = 13.5 * R0 * bmax
    r = dissipation_window_bound(50, Tstar, R0, bmax, bmin)
    assert r["case"] == "large-n" and abs(r["margin"]) < 1e-9 * 50 * Tstar
    assert dissipation_window_bound(50, 2 * Tstar, R0, bmax, bmin)["margin"] < 0
    assert dissipation_window_bound(1, 0.5, R0, bmax, bmin)["case"] == "small-n"
    # theta brackets on the window
    T = 3.0
    assert abs(1 / ((T / 3) * (2 * T / 3)) - 9 / (2 * T * T)) < 1e-15
    with pytest.raises(ValueError):
        dissipation_window_bound(0, 1.0, R0, bmax, bmin)


def test_truncation_scan_nested_spans():
    conv = truncation_scan(REG, 1.0, 4, [10, 20, 30])
    # a larger span can only raise the maximum
    for n in range(5):
        vals = [conv[L][n] for L in (10, 20, 30)]
        assert all(y >= x * (1 - 1e-10) for x, y in zip(vals, vals[1:]))
    assert conv[30] == uniform_scan(REG, 1.0, 4, 30, with_ratios=False).constants
