"""Invariant suite behind ``sphgrushin verify``.

Each check returns ``(name, value, tolerance, passed)`` where ``value`` is
the worst measured quantity. Sizes are kept small enough for a quick run;
the test suite covers the same ground at full size.
"""
from __future__ import annotations

import math

import numpy as np

from .carleman import (build_beta, kernel_bounds_check, make_params, mode_solution,
                       split_identity_check, theta_inequalities_check, carleman_diagnostic)
from .hardy import half_rule, hardy_constant_probe, hardy_pair, hardy_pair_Uv, operator_S
from .hum import hum_gramian, solve_mode_control
from .legendre import eigenfunction_vnl, mode_basis
from .numerics import default_order, make_latitude_rule
from .observability import (ControlRegion, mintime_lower_bound, mintime_ratio, obs_constant_mode,
                            observability_gramian, stirling_envelope_ratio, wallis_bound_check)
from .spectral import ModeState, apply_Ln, dissipation_check, duhamel_mode

__all__ = ["run_checks"]


def _eigen(cfg):
    L, N = 40, 8
    rule = make_latitude_rule(default_order(L, N))
    gram = resid = 0.0
    for n in range(N + 1):
        b = mode_basis(n, L, rule)
        gram = max(gram, float(np.abs(b.gram() - np.eye(b.size)).max()))
        for i, lam in enumerate(b.eigenvalues):
            v = b.samples[i]
            r = apply_Ln(v, n, rule) + lam * v
            resid = max(resid, math.sqrt(rule.integrate(r * r)))
    return [("gram_deviation", gram, 1e-8, gram < 1e-8),
            ("eigen_residual", resid, 1e-6, resid < 1e-6)]


def _dissipation(cfg):
    rng = np.random.default_rng(20240601)
    rule = make_latitude_rule(64)
    worst = -np.inf
    eq = 0.0
    bases = {n: mode_basis(n, 20, rule) for n in range(6)}
    for _ in range(50):
        n = int(rng.integers(0, 6))
        st = ModeState(n, rng.standard_normal(bases[n].size), bases[n])
        T = float(rng.uniform(0.1, 3.0))
        t = float(rng.uniform(0.01, 0.99)) * T
        lhs, rhs = dissipation_check(st, t, T)
        worst = max(worst, lhs - rhs)
        lhs, rhs = dissipation_check(ModeState.unit(bases[n], n), t, T)
        eq = max(eq, abs(lhs - rhs))
    return [("dissipation_violation", float(worst), 1e-12, worst <= 1e-12),
            ("dissipation_equality", eq, 1e-12, eq <= 1e-12)]


def _hardy(cfg):
    rx = make_latitude_rule(200, kind="legendre-x")
    probe = hardy_constant_probe([hardy_pair_Uv(n, l, rx) for n in range(1, 6) for l in range(n, 11)])
    lhs, rhs = hardy_pair(np.cos(rx.nodes), rx, cos_power=1)
    spot = max(abs(lhs - math.pi), abs(rhs - 2 * math.pi))
    h = half_rule(120)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        c = rng.standard_normal(12)
        f = np.polynomial.legendre.legval(4 * h.nodes / math.pi - 1, c)
        Sf = operator_S(f, h)
        worst = max(worst, h.integrate_plain(Sf * Sf) / (4 * h.integrate_plain(f * f)))
    return [("hardy_probe", probe, 1.0, probe <= 1 + 1e-8),
            ("hardy_spot_cos", spot, 1e-8, spot < 1e-8),
            ("operator_S_ratio", worst, 1.0, worst <= 1.0)]


def _mintime(cfg):
    reg = ControlRegion(math.pi / 3, 1.2)
    r = [mintime_ratio(n, 0.6, reg) for n in (20, 40, 60, 80)]
    dec = all(x > y for x, y in zip(r, r[1:]))
    viol = sum(not wallis_bound_check(n, 0.6, reg)["holds"] for n in range(1, 101))
    st = abs(stirling_envelope_ratio(100) - 1)
    th, th2 = mintime_lower_bound(math.pi / 3)
    return [("mintime_ratio_80_over_20", r[3] / r[0], 0.1, dec and r[3] / r[0] < 0.1),
            ("wallis_violations", float(viol), 0.0, viol == 0),
            ("stirling_gap_n100", st, 0.05, st < 0.05),
            ("threshold_pi_over_3", abs(th - math.log(2)), 1e-12,
             abs(th - math.log(2)) < 1e-12 and abs(th - th2) < 1e-15)]


def _duality(cfg):
    reg = ControlRegion(cfg["region.a"], cfg["region.b"])
    rule = make_latitude_rule(96)
    diff = 0.0
    worst = 0.0
    for T in (0.3, 0.6, 1.4):
        for n in range(0, 11):
            b = mode_basis(n, 30, rule)
            diff = max(diff, float(np.abs(hum_gramian(b, reg, T) - observability_gramian(b, reg, T)).max()))
            if n:
                c = obs_constant_mode(b, reg, T)
                worst = min(worst, c * mintime_ratio(n, T, reg) - 1.0)
    return [("gramian_duality", diff, 1e-12, diff <= 1e-12),
            ("obs_constant_vs_ratio", worst, -1e-10, worst >= -1e-10)]


def _hum(cfg):
    reg = ControlRegion(0.6, 1.2)
    rule = make_latitude_rule(64)
    worst_factor = np.inf
    mismatch = 0.0
    for n, ell in ((0, 0), (1, 3)):
        b = mode_basis(n, 20, rule)
        f0 = ModeState.unit(b, ell)
        norms = []
        for eps in (1e-2, 1e-4, 1e-6):
            h = solve_mode_control(f0, reg, 1.0, eps)
            sim = duhamel_mode(f0, h.control, 1.0).coeffs
            scale = max(np.linalg.norm(h.free_final), 1e-300)
            mismatch = max(mismatch, float(np.linalg.norm(sim - h.predicted_final) / scale))
            norms.append(h.final_norm)
        worst_factor = min(worst_factor, norms[0] / norms[1], norms[1] / norms[2])
    return [("hum_decrease_factor", float(worst_factor), 3.0, worst_factor >= 3.0),
            ("hum_simulation_mismatch", mismatch, 1e-8, mismatch <= 1e-8)]


def _carleman(cfg):
    w = build_beta(cfg["region.a"], cfg["region.b"], cfg["carleman.aPrime"], cfg["carleman.bPrime"],
                   cfg["carleman.A1"], cfg["carleman.A2"], cfg["carleman.A3"])
    inv = w.invariants()
    theta_ok = all(theta_inequalities_check(T, np.linspace(1e-3 * T, (1 - 1e-3) * T, 1000))["ok"]
                   for T in (0.1, 1.0, 10.0))
    T = cfg["time.T"]
    split = 0.0
    margin = np.inf
    for n in (1, 3, 6):
        p = make_params(w, T, n, cfg["carleman.sFactor"])
        sol = mode_solution(n, [n, n + 2], [1.0, 0.5])
        split = max(split, split_identity_check(sol, p.s, T, w))
        r = kernel_bounds_check(sol, p, w)
        margin = min(margin, *(r[k]["margin"] for k in ("deg", "bdy", "con")))
    cal = [mode_solution(n, [n + 1]) for n in (1, 2, 3)]
    held = [mode_solution(n, [n, n + 2], [1.0, 0.3]) for n in (1, 2, 3, 4, 5, 6)]
    diag = carleman_diagnostic(cal, held, w, cfg["region.a"], cfg["region.b"], T, cfg["carleman.sFactor"])
    beta_ok = inv["beta_ge_1"] and inv["eta1_grid"] > 0 and inv["eta2_grid"] > 0
    return [("beta_invariants", inv["beta_min"], 1.0, beta_ok),
            ("beta_c4_mismatch", inv["junction_mismatch"], 1e-6, inv["junction_mismatch"] < 1e-6),
            ("theta_inequalities", 1.0 if theta_ok else 0.0, 1.0, theta_ok),
            ("split_identity", split, 1e-5, split < 1e-5),
            ("kernel_margin_min", float(margin), 0.0, margin >= 0),
            ("carleman_heldout", float(min(diag["held_out"]) - diag["log_R1_hat"]), -math.log(2), diag["ok"])]


def run_checks(cfg):
    rows = []
    for fn in (_eigen, _dissipation, _hardy, _mintime, _duality, _hum, _carleman):
        rows.extend(fn(cfg))
    return rows
