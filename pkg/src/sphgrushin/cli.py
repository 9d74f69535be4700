"""Command line entry point: ``sphgrushin <command> [options]``.

Exit codes: 0 success, 1 failed invariant (``verify``), 2 configuration
error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .carleman import (admissibility_constants, build_beta, carleman_diagnostic, con_constants,
                       kernel_bounds_check, make_params, mode_solution, theta_inequalities_check)
from .checks import run_checks
from .config import ConfigError, config_hash, load_config
from .hum import assemble_control_2d, masking_error, solve_mode_control
from .legendre import mode_basis
from .numerics import default_order, make_latitude_rule
from .observability import (ControlRegion, mintime_lower_bound, mintime_ratio, stirling_envelope_ratio,
                            truncation_scan, uniform_scan, wallis_bound_check)
from .report import Table, write_svg
from .spectral import Field2D, ModeControl, apply_Ln, duhamel_mode

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

# flag dest -> config key
FLAG_KEYS = {
    "a": "region.a", "b": "region.b", "l_max": "truncation.L", "n_max": "modes.nMax",
    "order": "quadrature.order", "T": "time.T", "steps": "time.steps",
    "epsilons": "hum.epsilonList", "a_prime": "carleman.aPrime", "b_prime": "carleman.bPrime",
    "A1": "carleman.A1", "A2": "carleman.A2", "A3": "carleman.A3", "s_factor": "carleman.sFactor",
    "out": "output.dir", "n_list": "mintime.nList", "T_list": "mintime.TList", "init": "init.modes",
}


def _common(p):
    g = p.add_argument_group("settings (override the config file)")
    g.add_argument("--config", help="flat key = value file")
    g.add_argument("--out", help="output directory")
    g.add_argument("--json", action="store_true", help="also write a .json mirror of every table")
    g.add_argument("--a", type=float)
    g.add_argument("--b", type=float)
    g.add_argument("--l-max", type=int)
    g.add_argument("--n-max", type=int)
    g.add_argument("--order", type=int, help="latitude rule order, 0 for automatic")
    g.add_argument("--T", type=float)
    g.add_argument("--steps", type=int)
    g.add_argument("--epsilons", help="comma-separated penalties")
    g.add_argument("--a-prime", type=float)
    g.add_argument("--b-prime", type=float)
    g.add_argument("--A1", type=float)
    g.add_argument("--A2", type=float)
    g.add_argument("--A3", type=float)
    g.add_argument("--s-factor", type=float)
    g.add_argument("--n-list", help="comma-separated frequencies for mintime")
    g.add_argument("--T-list", help="comma-separated horizons for mintime")
    g.add_argument("--init", help="initial data as n:l:coef entries, comma separated")


def build_parser():
    p = argparse.ArgumentParser(prog="sphgrushin", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("spectrum", "eigenvalue table with Gram and residual checks"),
        ("simulate", "evolve initial data, optionally with a saved control"),
        ("mintime", "highest-weight ratios against the minimal-time threshold"),
        ("observability", "per-mode observability constants"),
        ("control", "penalized HUM sweep over epsilon"),
        ("carleman", "weight construction and Carleman diagnostics"),
        ("verify", "run the invariant suite; exit 1 on failure"),
    ]:
        sp = sub.add_parser(name, help=help_)
        _common(sp)
        if name == "simulate":
            sp.add_argument("--control-file", help="JSON written by 'control --save-control'")
        if name == "control":
            sp.add_argument("--save-control", help="write the smallest-epsilon control to this JSON file")
    return p


def _rule(cfg):
    order = cfg["quadrature.order"] or default_order(cfg["truncation.L"], cfg["modes.nMax"])
    return make_latitude_rule(order)


def _meta(cfg, **extra):
    m = {"config_hash": config_hash(cfg), "truncation.L": cfg["truncation.L"],
         "modes.nMax": cfg["modes.nMax"], "quadrature.order": cfg["quadrature.order"]}
    m.update(extra)
    return m


def _save(table, cfg, name, args):
    path = os.path.join(cfg["output.dir"], name)
    table.write(path, json_mirror=args.json)
    return path


def _parse_init(text, L):
    modes = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            n, ell, coef = item.split(":")
            n, ell, coef = int(n), int(ell), complex(coef)
        except ValueError as exc:
            raise ConfigError(f"bad init entry {item!r}; expected n:l:coef") from exc
        if not abs(n) <= ell <= L:
            raise ConfigError(f"init entry {item!r} needs |n| <= l <= L")
        modes.setdefault(n, {})[ell] = modes.get(n, {}).get(ell, 0) + coef
    if not modes:
        raise ConfigError("init.modes is empty")
    return modes


def _initial_field(cfg, rule):
    L = cfg["truncation.L"]
    entries_by_n = _parse_init(cfg["init.modes"], L)
    N = max(abs(n) for n in entries_by_n)
    coeffs = {}
    for n, entries in entries_by_n.items():
        c = np.zeros(L - abs(n) + 1, dtype=complex)
        for ell, v in entries.items():
            c[ell - abs(n)] = v
        coeffs[n] = c if np.any(c.imag) else c.real
    return Field2D.from_coefficients(coeffs, N, L, rule)


# ------------------------------------------------------------------ commands

def cmd_spectrum(cfg, args):
    rule = _rule(cfg)
    tab = Table(["n", "l", "lambda", "gramDeviation", "residual"], _meta(cfg))
    worst = 0.0
    for n in range(cfg["modes.nMax"] + 1):
        b = mode_basis(n, cfg["truncation.L"], rule)
        dev = np.abs(b.gram() - np.eye(b.size)).max(axis=1)
        for i, ell in enumerate(b.degrees):
            v = b.samples[i]
            r = apply_Ln(v, n, rule) + b.eigenvalues[i] * v
            res = math.sqrt(rule.integrate(r * r))
            worst = max(worst, float(dev[i]))
            tab.add(n, int(ell), float(b.eigenvalues[i]), float(dev[i]), res)
    tab.meta["max_gram_deviation"] = worst
    _save(tab, cfg, "spectrum.csv", args)
    print(f"spectrum: {len(tab.rows)} rows, max Gram deviation {worst:.3e}")
    return EXIT_OK


def _load_controls(path, field):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError:
        raise
    except ValueError as exc:
        raise ConfigError(f"control file {path!r} is not valid JSON") from exc
    edges = np.asarray(doc["edges"], dtype=float)
    out = {}
    for key, m in doc["modes"].items():
        n = int(key)
        if n not in field.modes:
            raise ConfigError(f"control mode {n} is absent from the initial data")
        vals = np.asarray(m["re"]) + 1j * np.asarray(m["im"])
        out[n] = ModeControl(n, edges, vals, field.modes[n].basis)
    return out, float(doc["T"])


def cmd_simulate(cfg, args):
    rule = _rule(cfg)
    f0 = _initial_field(cfg, rule)
    T, steps = cfg["time.T"], cfg["time.steps"]
    controls = {}
    if args.control_file:
        controls, Tc = _load_controls(args.control_file, f0)
        if not math.isclose(Tc, T, rel_tol=1e-12):
            raise ConfigError(f"control horizon {Tc} differs from time.T = {T}")
    times = np.linspace(0.0, T, steps + 1)
    ns = f0.frequencies
    tab = Table(["t", "norm"] + [f"norm_n{n}" for n in ns], _meta(cfg, init=cfg["init.modes"]))
    series = {n: [] for n in ns}
    for t in times:
        per = {n: duhamel_mode(f0.modes[n], controls.get(n), float(t)).norm() for n in ns}
        total = math.sqrt(sum(per[n] ** 2 for n in ns))
        tab.add(float(t), total, *(per[n] for n in ns))
        for n in ns:
            series[n].append(per[n])
    _save(tab, cfg, "simulate_norms.csv", args)
    fin = Table(["n", "l", "re", "im"], _meta(cfg, T=T))
    for n in ns:
        st = duhamel_mode(f0.modes[n], controls.get(n), T)
        for ell, c in zip(st.basis.degrees, st.coeffs):
            fin.add(n, int(ell), float(np.real(c)), float(np.imag(c)))
    _save(fin, cfg, "simulate_final.csv", args)
    write_svg(os.path.join(cfg["output.dir"], "simulate_norms.svg"),
              [(f"n={n}", times, series[n]) for n in ns], "t", "mode norm", "mode norm decay", logy=True)
    print(f"simulate: final norm {tab.rows[-1][1]:.6g} at T = {T}")
    return EXIT_OK


def cmd_mintime(cfg, args):
    reg = ControlRegion(cfg["region.a"], cfg["region.b"])
    thr, _ = mintime_lower_bound(reg)
    tab = Table(["T", "n", "ratio", "logRatio", "bound", "logBound", "boundHolds", "stirlingRatio"],
                _meta(cfg, threshold=thr))
    flags = {}
    series = []
    for T in cfg["mintime.TList"]:
        ns = sorted(set(cfg["mintime.nList"]))
        rs = []
        for n in ns:
            r = mintime_ratio(n, T, reg)
            wb = wallis_bound_check(n, T, reg)
            rs.append(r)
            tab.add(float(T), n, r, math.log(r), math.exp(wb["log_rhs"]), wb["log_rhs"],
                    bool(math.log(r) <= wb["log_rhs"] + 1e-12), stirling_envelope_ratio(n))
        tail = [r for n, r in zip(ns, rs) if n >= 20]
        decreasing = len(tail) >= 2 and all(x > y for x, y in zip(tail, tail[1:]))
        if T < thr and decreasing:
            flags[T] = "consistent-with-non-observability"
        elif T < thr:
            flags[T] = "inconclusive"
        else:
            flags[T] = "above-threshold"
        series.append((f"T={T:g}", ns, rs))
    for T, f in flags.items():
        tab.meta[f"flag_T={T!r}"] = f
    _save(tab, cfg, "mintime.csv", args)
    write_svg(os.path.join(cfg["output.dir"], "mintime.svg"), series, "n", "ratio_n",
              "observed / terminal energy of the highest-weight mode", logy=True)
    print(f"mintime: threshold log(1/cos a) = {thr:.6f}")
    for T, f in flags.items():
        print(f"  T = {T:g}: {f}")
    return EXIT_OK


def cmd_observability(cfg, args):
    reg = ControlRegion(cfg["region.a"], cfg["region.b"])
    rep = uniform_scan(reg, cfg["time.T"], cfg["modes.nMax"], cfg["truncation.L"],
                       order=cfg["quadrature.order"] or None)
    tab = Table(["n", "C_n", "effectiveDim", "inverseRatio"],
                _meta(cfg, T=cfg["time.T"], threshold=rep.threshold, trend=rep.trend(), note=rep.note))
    for n in sorted(rep.constants):
        inv = 1.0 / rep.ratios[n] if n in rep.ratios else float("nan")
        tab.add(n, rep.constants[n], rep.effective_dims[n], inv)
    _save(tab, cfg, "observability.csv", args)
    L = cfg["truncation.L"]
    Ls = sorted({max(cfg["modes.nMax"], L // 2), max(cfg["modes.nMax"], (3 * L) // 4), L})
    conv = truncation_scan(reg, cfg["time.T"], cfg["modes.nMax"], Ls)
    ct = Table(["n"] + [f"C_n_L{v}" for v in Ls], _meta(cfg, T=cfg["time.T"], note=rep.note))
    for n in sorted(rep.constants):
        ct.add(n, *(conv[v][n] for v in Ls))
    _save(ct, cfg, "observability_truncation.csv", args)
    print(f"observability: max C_n = {rep.max_constant:.6g}, trend {rep.trend()}")
    return EXIT_OK


def cmd_control(cfg, args):
    reg = ControlRegion(cfg["region.a"], cfg["region.b"])
    rule = _rule(cfg)
    f0 = _initial_field(cfg, rule)
    T, steps = cfg["time.T"], cfg["time.steps"]
    tab = Table(["epsilon", "n", "finalNorm", "freeNorm", "simulationMismatch", "cost", "maskingError"],
                _meta(cfg, T=T, init=cfg["init.modes"]))
    totals = []
    last = {}
    for eps in cfg["hum.epsilonList"]:
        tot = 0.0
        for n in f0.frequencies:
            h = solve_mode_control(f0.modes[n], reg, T, eps, steps=steps)
            sim = duhamel_mode(f0.modes[n], h.control, T).coeffs
            scale = max(float(np.linalg.norm(h.free_final)), 1e-300)
            mism = float(np.linalg.norm(sim - h.predicted_final)) / scale
            tab.add(float(eps), n, h.final_norm, float(np.linalg.norm(h.free_final)), mism, h.cost,
                    masking_error(h.control.values, h.control.basis, reg))
            tot += h.final_norm ** 2
            last[n] = h.control
        totals.append(math.sqrt(tot))
    _save(tab, cfg, "control.csv", args)
    write_svg(os.path.join(cfg["output.dir"], "control.svg"),
              [("final norm", np.log10(cfg["hum.epsilonList"]), totals)],
              "log10 epsilon", "final norm", "penalized HUM", logy=True)
    if args.save_control:
        ctl = assemble_control_2d(last, reg)
        doc = {"T": T, "edges": [float(e) for e in ctl.edges], "modes": {
            str(n): {"re": np.real(ctl.modes[n].values).tolist(), "im": np.imag(ctl.modes[n].values).tolist()}
            for n in ctl.frequencies}}
        os.makedirs(os.path.dirname(os.path.abspath(args.save_control)), exist_ok=True)
        with open(args.save_control, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
    print("control: final norms " + ", ".join(f"{v:.3e}" for v in totals))
    return EXIT_OK


def _weight(cfg):
    try:
        return build_beta(cfg["region.a"], cfg["region.b"], cfg["carleman.aPrime"], cfg["carleman.bPrime"],
                          cfg["carleman.A1"], cfg["carleman.A2"], cfg["carleman.A3"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_carleman(cfg, args):
    w = _weight(cfg)
    ac = admissibility_constants(w)
    cc = con_constants(w, ac.R0)
    rep = Table(["quantity", "value"], _meta(cfg))
    for k, v in [("betaMin", w.betaMin), ("betaMax", w.betaMax), ("argMin", w.argMin),
                 ("eta1", w.eta1), ("eta2", w.eta2), ("s1", ac.s1), ("s2", ac.s2), ("R0", ac.R0),
                 ("Tstar", ac.Tstar), ("Tstar_betaMin", ac.Tstar_betaMin),
                 ("C1", ac.C1), ("C2", ac.C2), ("C4", ac.C4), ("C5", ac.C5), ("C6", ac.C6), ("C7", ac.C7),
                 ("C9", cc["C9"]), ("C10", cc["C10"]), ("C11", cc["C11"]), ("C12", cc["C12"]),
                 ("C12_swapped", cc["C12_swapped"]), ("junctionMismatch", w.junction_mismatch())]:
        rep.add(k, float(v))
    _save(rep, cfg, "carleman_weight.csv", args)

    x = np.linspace(-math.pi / 2, math.pi / 2, 801)
    bt = Table(["x", "beta", "dbeta", "d2beta", "region"], _meta(cfg))
    vals = [w.derivative(x, k) for k in range(3)]
    reg = w.region(x)
    for i in range(x.size):
        bt.add(float(x[i]), float(vals[0][i]), float(vals[1][i]), float(vals[2][i]), int(reg[i]))
    _save(bt, cfg, "carleman_beta.csv", args)
    write_svg(os.path.join(cfg["output.dir"], "carleman_beta.svg"), [("beta", x, vals[0])],
              "x", "beta", "space weight")

    th = Table(["T", "theta", "dtheta", "theta_dtheta", "d2theta", "ok"], _meta(cfg))
    for T in (0.1, 1.0, 10.0):
        r = theta_inequalities_check(T, np.linspace(1e-3 * T, (1 - 1e-3) * T, 1000))
        th.add(T, r["theta"], r["dtheta"], r["theta_dtheta"], r["d2theta"], r["ok"])
    _save(th, cfg, "carleman_theta.csv", args)

    T = cfg["time.T"]
    kt = Table(["n", "s", "degMargin", "bdyMargin", "conMargin"], _meta(cfg, T=T))
    for n in (1, 3, 6):
        p = make_params(w, T, n, cfg["carleman.sFactor"])
        r = kernel_bounds_check(mode_solution(n, [n, n + 2], [1.0, 0.5]), p, w)
        kt.add(n, p.s, r["deg"]["margin"], r["bdy"]["margin"], r["con"]["margin"])
    _save(kt, cfg, "carleman_kernels.csv", args)

    cal = [mode_solution(n, [n + 1]) for n in (1, 2, 3)]
    held = [mode_solution(n, [n, n + 2], [1.0, 0.3]) for n in (1, 2, 3, 4, 5, 6)]
    d = carleman_diagnostic(cal, held, w, cfg["region.a"], cfg["region.b"], T, cfg["carleman.sFactor"])
    dt = Table(["family", "index", "logRatio", "passed"], _meta(cfg, T=T, log_R1_hat=d["log_R1_hat"]))
    for i, v in enumerate(d["calibration"]):
        dt.add("calibration", i, v, True)
    for i, (v, ok) in enumerate(zip(d["held_out"], d["passed"])):
        dt.add("held_out", i, v, ok)
    _save(dt, cfg, "carleman_diagnostic.csv", args)
    print(f"carleman: beta_* = {w.betaMin:.6g}, beta^* = {w.betaMax:.6g}, eta1 = {w.eta1:.6g}, "
          f"eta2 = {w.eta2:.6g}, s1 = {ac.s1:.6g}, s2 = {ac.s2:.6g}, R0 = {ac.R0:.6g}, T* = {ac.Tstar:.6g}")
    return EXIT_OK


def cmd_verify(cfg, args):
    rows = run_checks(cfg)
    tab = Table(["check", "value", "tolerance", "passed"], _meta(cfg))
    for r in rows:
        tab.add(r[0], float(r[1]), float(r[2]), bool(r[3]))
    _save(tab, cfg, "verify.csv", args)
    failed = [r[0] for r in rows if not r[3]]
    for r in rows:
        print(f"{'PASS' if r[3] else 'FAIL'} {r[0]}")
    return EXIT_INVARIANT if failed else EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum, "simulate": cmd_simulate, "mintime": cmd_mintime,
    "observability": cmd_observability, "control": cmd_control, "carleman": cmd_carleman,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {key: getattr(args, dest, None) for dest, key in FLAG_KEYS.items()}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
