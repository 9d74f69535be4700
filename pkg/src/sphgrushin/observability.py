"""Per-mode observability Gramians and constants, and the minimal-time experiment.

For a mode ``n`` truncated at degree ``L`` a solution of the free equation
is ``g(t) = sum_l c_l e^{-lambda_l t} v_{n,l}``. Observed energy over
``omega = (-b, -a) U (a, b)`` during ``(0, T)`` is ``c^T M c`` with
``M = S o Theta``, where ``S`` is the spatial overlap on ``omega`` and
``Theta_{ll'} = (1 - e^{-(lambda_l + lambda_l') T}) / (lambda_l + lambda_l')``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .legendre import (ModeBasis, eigenfunction_table, legendre_table, mode_basis,
                       wn_nominal_log_amplitude)
from .numerics import HALF_PI, default_order, make_latitude_rule, make_time_grid

__all__ = [
    "ControlRegion",
    "ObservabilityReport",
    "spatial_overlap_matrix",
    "time_factor",
    "observability_gramian",
    "obs_constant_mode",
    "ObsConstant",
    "brute_force_observed_energy",
    "observed_energy_2d",
    "mintime_ratio",
    "wallis_bound_check",
    "stirling_envelope_ratio",
    "mintime_lower_bound",
    "uniform_scan",
    "truncation_scan",
    "dissipation_window_bound",
    "UNDERFLOW",
]

UNDERFLOW = 1e-300


@dataclass(frozen=True)
class ControlRegion:
    """``omega_{a,b} = (-b, -a) U (a, b)`` with ``0 < a < b <= pi/2``."""

    a: float
    b: float
    both_crowns: bool = True

    def __post_init__(self):
        if not 0 < self.a < self.b <= HALF_PI:
            raise ValueError(f"need 0 < a < b <= pi/2, got a={self.a}, b={self.b}")

    @property
    def alpha(self) -> float:
        return math.sin(self.a)

    @property
    def beta(self) -> float:
        return math.sin(self.b)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ax = np.abs(x) if self.both_crowns else x
        return (ax > self.a) & (ax < self.b)

    def pieces(self):
        if self.both_crowns:
            return [(-self.b, -self.a), (self.a, self.b)]
        return [(self.a, self.b)]


def _crown_rule(region: ControlRegion, order: int):
    """Gauss nodes in ``t`` on ``(sin a, sin b)``; ``cos x dx = dt``."""
    xi, wi = np.polynomial.legendre.leggauss(order)
    lo, hi = region.alpha, region.beta
    half = 0.5 * (hi - lo)
    return 0.5 * (hi + lo) + half * xi, half * wi


def spatial_overlap_matrix(basis: ModeBasis, region: ControlRegion, order: int | None = None):
    """``S_{ll'} = int_omega v_{n,l} v_{n,l'} cos x dx``, exact for polynomial integrands.

    The negative crown follows from the parity ``(-1)^{l + l'}`` of the product.
    """
    n = abs(basis.n)
    if order is None:
        order = max(64, basis.L + 2)
    t, w = _crown_rule(region, order)
    P = legendre_table(n, basis.L, t)
    S = (P * w) @ P.T
    if region.both_crowns:
        deg = basis.degrees
        S = S * (1.0 + (-1.0) ** (deg[:, None] + deg[None, :]))
    return 0.5 * (S + S.T)


def time_factor(lam, T: float) -> np.ndarray:
    """``Theta_{ll'}``; the entry is ``T`` where ``lambda_l + lambda_l' = 0``."""
    if not T > 0:
        raise ValueError(f"T must be positive, got {T!r}")
    lam = np.asarray(lam, dtype=float)
    mu = lam[:, None] + lam[None, :]
    safe = np.where(mu > 0, mu, 1.0)
    return np.where(mu > 0, -np.expm1(-mu * T) / safe, T)


def observability_gramian(basis: ModeBasis, region: ControlRegion, T: float, S=None):
    if S is None:
        S = spatial_overlap_matrix(basis, region)
    return S * time_factor(basis.eigenvalues, T)


@dataclass(frozen=True)
class ObsConstant:
    value: float
    effective_dim: int
    ridge: float
    condition: float


def _terminal_matrix(basis: ModeBasis, T: float, weighted: bool, plain_order: int | None):
    decay = np.exp(-basis.eigenvalues * T)
    decay = np.where(decay * decay < UNDERFLOW, 0.0, decay)
    if weighted:
        return np.diag(decay * decay)
    order = plain_order or default_order(basis.L, basis.n) + 32
    rx = make_latitude_rule(order, kind="legendre-x")
    V = eigenfunction_table(basis.n, basis.L, rx.nodes)
    return np.outer(decay, decay) * ((V * rx.plain_weights) @ V.T)


def obs_constant_mode(basis: ModeBasis, region: ControlRegion, T: float, weighted: bool = True,
                      plain_order: int | None = None, details: bool = False):
    """Smallest ``C`` with ``||g(T)||^2 <= C int_0^T int_omega g^2`` on the truncated span.

    It is the largest generalized eigenvalue of ``(D, M)``. Both matrices
    are scaled by ``diag(M)^{-1/2}`` first; a ridge of ``1e-14`` times the
    trace of the scaled ``M`` is then added. Terminal factors below
    ``1e-300`` are set to zero and do not count toward the effective
    dimension. ``weighted=False`` measures ``g(T)`` without the ``cos x``
    weight.
    """
    M = observability_gramian(basis, region, T)
    D = _terminal_matrix(basis, T, weighted, plain_order)
    d = np.sqrt(np.diag(M))
    if np.any(d <= 0):
        raise ValueError("Gramian has a zero diagonal entry; region misses the support")
    E = 1.0 / d
    Mt = M * np.outer(E, E)
    Dt = D * np.outer(E, E)
    ridge = 1e-14 * float(np.trace(Mt))
    Mt = Mt + ridge * np.eye(Mt.shape[0])
    try:
        vals = linalg.eigh(Dt, Mt, eigvals_only=True)
    except linalg.LinAlgError as exc:
        raise ValueError(f"Gramian singular beyond ridge repair (cond ~ {np.linalg.cond(Mt):.3e})") from exc
    eff = int(np.count_nonzero(np.diag(D) > 0))
    out = ObsConstant(float(max(vals.max(), 0.0)), eff, ridge, float(np.linalg.cond(Mt)))
    return out if details else out.value


def brute_force_observed_energy(basis: ModeBasis, region: ControlRegion, T: float, c,
                                steps: int = 40, points: int = 12, order: int = 80) -> float:
    """``int_0^T int_omega g^2 cos x dx dt`` by explicit space-time quadrature."""
    tg = make_time_grid(T, steps, clearance=0.0, points_per_panel=points)
    total = 0.0
    c = np.asarray(c, dtype=float)
    for lo, hi in region.pieces():
        r = make_latitude_rule(order, kind="legendre-x", lo=lo, hi=hi)
        V = eigenfunction_table(basis.n, basis.L, r.nodes)
        G = (np.exp(-np.outer(tg.nodes, basis.eigenvalues)) * c) @ V
        total += float(tg.weights @ (G * G) @ r.weights)
    return total


def observed_energy_2d(field, region: ControlRegion, T: float, ny: int | None = None,
                       steps: int = 20, points: int = 10, order: int = 64) -> float:
    """``int_0^T int_omega int_0^{2pi} |g|^2 cos x dy dx dt`` from 2D samples."""
    ny = ny or 4 * field.N + 4
    y = 2.0 * np.pi * np.arange(ny) / ny
    tg = make_time_grid(T, steps, clearance=0.0, points_per_panel=points)
    total = 0.0
    for lo, hi in region.pieces():
        r = make_latitude_rule(order, kind="sin", lo=lo, hi=hi)
        for tk, wk in zip(tg.nodes, tg.weights):
            g = field.evolve(tk).samples(r.nodes, y)
            total += wk * float(r.weights @ (np.abs(g) ** 2).sum(axis=1)) * (2.0 * np.pi / ny)
    return total


def _log_crown_integral(n: int, region: ControlRegion, order: int) -> float:
    """``log int_a^b cos^{2n+1} x dx`` (one crown), in log space."""
    r = make_latitude_rule(order, kind="legendre-x", lo=region.a, hi=region.b)
    return float(logsumexp((2 * n + 1) * np.log(np.cos(r.nodes)) + np.log(r.plain_weights)))


def mintime_ratio(n: int, T: float, region: ControlRegion, order: int | None = None) -> float:
    """Observed energy of ``e^{-nt} w_n`` over its terminal energy.

    ``w_n`` has unit weighted norm, so the denominator is ``e^{-2nT}`` and
    the time integral is ``(1 - e^{-2nT}) / (2n)``. The spatial integral
    ``int_omega w_n^2 cos x dx`` is a polynomial integral in ``t = sin x``
    and is computed exactly.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if not T > 0:
        raise ValueError("T must be positive")
    order = order or max(64, n + 2)
    t, w = _crown_rule(region, order)
    # unit-norm w_n^2 cos x dx = (2n+1)!/(2^{2n+1} n!^2) (1 - t^2)^n dt
    logc = 2.0 * wn_nominal_log_amplitude(n) - math.log(2.0)
    log_int = float(logsumexp(logc + n * np.log1p(-t * t) + np.log(w)))
    if region.both_crowns:
        log_int += math.log(2.0)
    log_time = math.log(-math.expm1(-2.0 * n * T) / (2.0 * n))
    return math.exp(log_int + log_time + 2.0 * n * T)


def wallis_bound_check(n: int, T: float, region: ControlRegion, order: int = 200) -> dict:
    """Both sides, in logs, of the Wallis-type bound on one crown ``(a, b)``.

    ``lhs = e^{2nT}/(2n) int_a^b w_n^2 cos x dx`` with the nominal
    amplitude of ``w_n``; ``rhs = e^{2n(T + log cos a)} (2n+1)!/(n 2^{2n+1}
    n!^2) (b - a) cos a``.
    """
    a, b = region.a, region.b
    amp = 2.0 * wn_nominal_log_amplitude(n)
    log_lhs = 2 * n * T - math.log(2 * n) + amp + _log_crown_integral(n, region, order)
    log_rhs = (2 * n * (T + math.log(math.cos(a))) + math.lgamma(2 * n + 2) - math.log(n)
               - (2 * n + 1) * math.log(2.0) - 2 * math.lgamma(n + 1)
               + math.log(b - a) + math.log(math.cos(a)))
    return {"n": n, "log_lhs": log_lhs, "log_rhs": log_rhs, "holds": log_lhs <= log_rhs + 1e-12}


def stirling_envelope_ratio(n: int) -> float:
    """``(2n+1)!/(n 2^{2n+1} n!^2)`` over ``(2n+1)/(2 sqrt(pi) n^{3/2})``.

    Equals ``binom(2n, n) sqrt(pi n) / 4^n``, which tends to 1.
    """
    log_c = math.lgamma(2 * n + 1) - 2 * math.lgamma(n + 1) - n * math.log(4.0)
    return math.exp(log_c + 0.5 * math.log(math.pi * n))


def mintime_lower_bound(region_or_a) -> tuple:
    """``(log(1/cos a), log(1/sqrt(1 - alpha^2)))`` with ``alpha = sin a``."""
    a = region_or_a.a if isinstance(region_or_a, ControlRegion) else float(region_or_a)
    alpha = math.sin(a)
    return -math.log(math.cos(a)), -0.5 * math.log1p(-alpha * alpha)


@dataclass
class ObservabilityReport:
    region: ControlRegion
    T: float
    L: int
    constants: dict = field(default_factory=dict)
    effective_dims: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)
    threshold: float = float("nan")

    @property
    def above_threshold(self) -> bool:
        return self.T > self.threshold

    @property
    def max_constant(self) -> float:
        return max(self.constants.values())

    def trend(self) -> str:
        """``"growing"`` if the log constants rise over the upper half of ``n``."""
        ns = sorted(self.constants)
        if len(ns) < 4:
            return "undetermined"
        tail = ns[len(ns) // 2:]
        logs = np.log([self.constants[n] for n in tail])
        slope = np.polyfit(tail, logs, 1)[0]
        return "growing" if slope > 0.05 else "bounded"

    note = "diagnostic on a truncated span; no statement beyond the computed degrees"


def uniform_scan(region: ControlRegion, T: float, Nmax: int, L: int, order: int | None = None,
                 with_ratios: bool = True) -> ObservabilityReport:
    """``C_n(T)`` for ``n = 0..Nmax``, ascending."""
    if L < Nmax:
        raise ValueError("need L >= Nmax")
    order = order or default_order(L, Nmax)
    rule = make_latitude_rule(order)
    rep = ObservabilityReport(region, T, L, threshold=mintime_lower_bound(region)[0])
    for n in range(Nmax + 1):
        c = obs_constant_mode(mode_basis(n, L, rule), region, T, details=True)
        rep.constants[n] = c.value
        rep.effective_dims[n] = c.effective_dim
        if with_ratios and n >= 1:
            rep.ratios[n] = mintime_ratio(n, T, region)
    return rep


def truncation_scan(region: ControlRegion, T: float, Nmax: int, Ls) -> dict:
    """``{L: {n: C_n(T)}}`` for several truncations ``L >= Nmax``.

    Only a convergence view: agreement across ``L`` says nothing about the
    untruncated constant.
    """
    out = {}
    for L in sorted(set(int(v) for v in Ls)):
        rep = uniform_scan(region, T, Nmax, L, with_ratios=False)
        out[L] = dict(rep.constants)
    return out


def dissipation_window_bound(n: int, T: float, R0: float, betaMax: float, betaMin: float,
                             R1: float = 1.0) -> dict:
    """Constants of the terminal-energy bound obtained on the window ``(T/3, 2T/3)``.

    ``lhs_factor`` is ``T/3``; ``rhs_factor`` is
    ``(1/R1) T^6/64 * 6/(8 s^3 beta_*^3) e^{exponent}`` with
    ``exponent = -(2/3) n T + 9 s beta^* / T^2``. For ``n >= 1 + 1/T`` the
    weight parameter is ``s = R0 T^2 n`` and the exponent is
    ``n (9 R0 beta^* - 2T/3)``, which is non-positive iff
    ``T >= 27 R0 beta^* / 2``.
    """
    if n < 1 or not T > 0:
        raise ValueError("need n >= 1 and T > 0")
    if n < 1 + 1.0 / T:
        case, s = "small-n", R0 * (T + T * T)
    else:
        case, s = "large-n", R0 * T * T * n
    exponent = -2.0 * n * T / 3.0 + 9.0 * s * betaMax / (T * T)
    log_rhs = (math.log(T ** 6 / 64.0) + math.log(6.0 / (8.0 * s ** 3 * betaMin ** 3))
               - math.log(R1) + exponent)
    return {"case": case, "s": s, "exponent": exponent, "lhs_factor": T / 3.0,
            "log_rhs_factor": log_rhs, "margin": exponent}
