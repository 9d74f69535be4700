"""Carleman weights for the transformed mode operator ``d_t - M_n``.

The space weight ``beta`` is explicit near the poles and on the
degenerate band around the equator, and a degree-9 Hermite blend on the
two connecting intervals ``(a', b')`` and ``(-b', -a')``. The time weight
is ``theta(t) = 1 / (t (T - t))`` and ``phi = s theta beta``.

Everything that integrates ``e^{-2 phi}`` works with shifted exponents
(``phi - min phi``) or in log space; the raw factors underflow for any
admissible ``s``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BPoly
from scipy.special import logsumexp

from .legendre import eigenfunction_table, eigenfunction_dx_table
from .numerics import HALF_PI, make_latitude_rule, make_time_grid
from .transforms import PotentialQn

__all__ = [
    "CarlemanWeight",
    "CarlemanParams",
    "AdmissibilityConstants",
    "build_beta",
    "search_beta_constants",
    "theta_eval",
    "theta_inequalities_check",
    "phi_eval",
    "admissibility_constants",
    "con_constants",
    "admissible_s",
    "make_params",
    "ModeSolution",
    "mode_solution",
    "split_identity_check",
    "kernel_eval",
    "kernel_general",
    "kernel_literal",
    "splitting_product",
    "kernel_bounds_check",
    "carleman_ratio",
    "carleman_diagnostic",
]


def _deg_piece(x, A3):
    """``log cos x - x^2/2 + A3 (x + 1)`` and derivatives 1..4."""
    c = np.cos(x)
    tan = np.tan(x)
    sec2 = 1.0 / (c * c)
    return [
        np.log(c) - 0.5 * x * x + A3 * (x + 1.0),
        -tan - x + A3,
        -sec2 - 1.0,
        -2.0 * sec2 * tan,
        -4.0 * sec2 * tan * tan - 2.0 * sec2 * sec2,
    ]


def _bdy_piece(x, A1, A2):
    """``log|sin x| + A1 |x| + A2`` and derivatives 1..4 (``x != 0``)."""
    sg = np.sign(x)
    s = np.sin(x)
    cot = np.cos(x) / s
    csc2 = 1.0 / (s * s)
    return [
        np.log(np.abs(s)) + A1 * np.abs(x) + A2,
        cot + A1 * sg,
        -csc2,
        2.0 * csc2 * cot,
        -4.0 * csc2 * cot * cot - 2.0 * csc2 * csc2,
    ]


@dataclass(frozen=True, eq=False)
class CarlemanWeight:
    """Space weight ``beta`` with its regions and measured constants."""

    a: float
    b: float
    aPrime: float
    bPrime: float
    A1: float
    A2: float
    A3: float
    eta1: float = float("nan")
    eta2: float = float("nan")
    betaMin: float = float("nan")
    betaMax: float = float("nan")
    argMin: float = float("nan")
    _blend_right: BPoly = field(default=None, repr=False)
    _blend_left: BPoly = field(default=None, repr=False)

    def region(self, x):
        """``0`` degenerate band, ``1`` connecting intervals, ``2`` polar caps."""
        ax = np.abs(np.asarray(x, dtype=float))
        return np.where(ax <= self.aPrime, 0, np.where(ax < self.bPrime, 1, 2))

    def derivative(self, x, k: int = 0):
        """``beta^{(k)}(x)`` for ``0 <= k <= 4``."""
        if not 0 <= k <= 4:
            raise ValueError("only derivatives 0..4 are available")
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.empty_like(x)
        reg = self.region(x)
        m = reg == 0
        if np.any(m):
            out[m] = _deg_piece(x[m], self.A3)[k]
        m = reg == 2
        if np.any(m):
            out[m] = _bdy_piece(x[m], self.A1, self.A2)[k]
        m = (reg == 1) & (x > 0)
        if np.any(m):
            out[m] = self._blend_right.derivative(k)(x[m]) if k else self._blend_right(x[m])
        m = (reg == 1) & (x < 0)
        if np.any(m):
            out[m] = self._blend_left.derivative(k)(x[m]) if k else self._blend_left(x[m])
        return float(out[0]) if scalar else out

    def __call__(self, x):
        return self.derivative(x, 0)

    def sup_norm(self, k: int = 0, region=None, points: int = 4001) -> float:
        """Grid maximum of ``|beta^{(k)}|``, optionally on one region."""
        x = np.linspace(-HALF_PI, HALF_PI, points)
        if region is not None:
            x = x[self.region(x) == region]
        if region == 1:
            x = np.concatenate([x, [-self.bPrime, -self.aPrime, self.aPrime, self.bPrime]])
        return float(np.max(np.abs(self.derivative(x, k))))

    def junction_mismatch(self) -> float:
        """Largest jump of derivatives 0..4 across ``+-a'`` and ``+-b'``.

        One-sided values come from the closed forms and from the blends.
        """
        worst = 0.0
        for side, blend in ((1.0, self._blend_right), (-1.0, self._blend_left)):
            xa, xb = side * self.aPrime, side * self.bPrime
            deg = _deg_piece(np.array([xa]), self.A3)
            bdy = _bdy_piece(np.array([xb]), self.A1, self.A2)
            for k in range(5):
                fb = blend.derivative(k) if k else blend
                worst = max(worst, abs(float(fb(xa)) - float(deg[k][0])) / (1 + abs(float(deg[k][0]))),
                            abs(float(fb(xb)) - float(bdy[k][0])) / (1 + abs(float(bdy[k][0]))))
        return worst

    def invariants(self, points: int = 10001) -> dict:
        """Grid checks of ``beta >= 1`` and the slope bounds on the explicit pieces."""
        x = np.linspace(-HALF_PI, HALF_PI, points)
        beta = self.derivative(x, 0)
        d1 = self.derivative(x, 1)
        reg = self.region(x)
        return {
            "beta_min": float(beta.min()),
            "beta_ge_1": bool(beta.min() >= 1.0),
            "eta1_grid": float(np.abs(d1[reg == 2]).min()),
            "eta2_grid": float(d1[reg == 0].min()),
            "junction_mismatch": self.junction_mismatch(),
        }


def _blend(x0, x1, d0, d1):
    return BPoly.from_derivatives([x0, x1], [list(d0), list(d1)])


def build_beta(a, b, aPrime, bPrime, A1, A2, A3, check=True, points: int = 10001) -> CarlemanWeight:
    """Assemble the weight and measure ``eta1``, ``eta2``, ``beta_*``, ``beta^*``.

    Raises ``ValueError`` on bad ordering, non-positive constants, or (with
    ``check``) when ``beta < 1`` somewhere on the grid.
    """
    if not 0 < a < aPrime < bPrime < b <= HALF_PI:
        raise ValueError(f"need 0 < a < a' < b' < b <= pi/2, got {a}, {aPrime}, {bPrime}, {b}")
    if min(A1, A2, A3) <= 0:
        raise ValueError("A1, A2, A3 must be positive")
    ra = np.array([aPrime])
    rb = np.array([bPrime])
    dr0 = [v[0] for v in _deg_piece(ra, A3)]
    dr1 = [v[0] for v in _bdy_piece(rb, A1, A2)]
    dl0 = [v[0] for v in _bdy_piece(-rb, A1, A2)]
    dl1 = [v[0] for v in _deg_piece(-ra, A3)]
    right = _blend(aPrime, bPrime, dr0, dr1)
    left = _blend(-bPrime, -aPrime, dl0, dl1)
    w = CarlemanWeight(a, b, aPrime, bPrime, A1, A2, A3, _blend_right=right, _blend_left=left)
    x = np.linspace(-HALF_PI, HALF_PI, points)
    x = np.union1d(x, [-bPrime, -aPrime, aPrime, bPrime])
    beta = w.derivative(x, 0)
    d1 = w.derivative(x, 1)
    reg = w.region(x)
    i = int(np.argmin(beta))
    if check and beta[i] < 1.0:
        raise ValueError(f"beta < 1 at x = {x[i]:.6g} (beta = {beta[i]:.6g})")
    return CarlemanWeight(a, b, aPrime, bPrime, A1, A2, A3,
                          eta1=float(np.abs(d1[reg == 2]).min()),
                          eta2=float(d1[reg == 0].min()),
                          betaMin=float(beta[i]), betaMax=float(beta.max()), argMin=float(x[i]),
                          _blend_right=right, _blend_left=left)


def _monotone_on_con(w: CarlemanWeight, points=801) -> bool:
    # right blend rises from the band into the cap; the left one has a single dip
    x = np.linspace(w.aPrime, w.bPrime, points)
    return bool(np.all(w.derivative(x, 1) > 0))


def search_beta_constants(a, b, aPrime, bPrime, A1_grid, A2_grid, A3_grid, points: int = 2001):
    """Coarse grid search for admissible ``(A1, A2, A3)``.

    Feasible means ``beta >= 1``, ``eta1, eta2 > 0`` and an increasing blend
    on ``(a', b')``. Among feasible triples the one with the smallest
    ``T* = 27 R0 beta^* / 2`` wins. Returns ``(best, table)`` where ``table``
    lists every feasible triple with its ``T*``.
    """
    table = []
    for A1, A2, A3 in itertools.product(A1_grid, A2_grid, A3_grid):
        try:
            w = build_beta(a, b, aPrime, bPrime, A1, A2, A3, points=points)
        except ValueError:
            continue
        if not (w.eta1 > 0 and w.eta2 > 0 and _monotone_on_con(w)):
            continue
        ac = admissibility_constants(w)
        table.append((float(A1), float(A2), float(A3), ac.Tstar))
    if not table:
        raise ValueError("no feasible constants on the search grid")
    best = min(table, key=lambda r: (r[3], r[0], r[1], r[2]))
    return best[:3], table


# ---------------------------------------------------------------- time weight

def theta_eval(t, T: float):
    """``(theta, theta', theta'')`` at ``t`` in ``(0, T)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(t >= T):
        raise ValueError("t must lie strictly inside (0, T)")
    th = 1.0 / (t * (T - t))
    u = 2.0 * t - T
    d1 = u * th * th
    d2 = 2.0 * th * th * (1.0 + u * u * th)
    return th, d1, d2


def theta_inequalities_check(T: float, t) -> dict:
    """Worst relative margins of the four ``theta^3`` bounds at the nodes ``t``.

    A margin is ``(bound - value) / bound``; non-negative means it holds.
    """
    th, d1, d2 = theta_eval(t, T)
    th3 = th ** 3
    checks = {
        "theta": (2.0 ** -4 * T ** 4 * th3, th),
        "dtheta": (2.0 ** -2 * T ** 3 * th3, np.abs(d1)),
        "theta_dtheta": (T * th3, np.abs(th * d1)),
        "d2theta": (2.5 * T * T * th3, np.abs(d2)),
    }
    out = {k: float(np.min((bnd - val) / bnd)) for k, (bnd, val) in checks.items()}
    out["ok"] = all(v >= -1e-14 for v in out.values())
    return out


def phi_eval(t, x, s: float, T: float, weight: CarlemanWeight):
    th, _, _ = theta_eval(t, T)
    return s * np.multiply.outer(th, weight(x)) if np.ndim(t) and np.ndim(x) else s * th * weight(x)


# ------------------------------------------------------------- admissibility

@dataclass(frozen=True)
class AdmissibilityConstants:
    C1: float
    C2: float
    C4: float
    C5: float
    C6: float
    C7: float
    s1: float
    s2: float
    R0: float
    Tstar: float
    Tstar_betaMin: float


def admissibility_constants(weight: CarlemanWeight) -> AdmissibilityConstants:
    """Thresholds ``s1``, ``s2``, ``R0 = max(s1, s2)`` and the time ``T*``.

    ``T* = 27 R0 beta^* / 2`` uses the maximum of ``beta``; the value with
    the minimum is returned alongside.
    """
    ap, bp = weight.aPrime, weight.bPrime
    A1, A3 = weight.A1, weight.A3
    e1, e2 = weight.eta1, weight.eta2
    C1 = (math.tan(ap) + ap + A3) ** 2
    C2 = abs(math.log(math.cos(ap)) - 0.5 * ap * ap + A3 * (ap + 1.0))
    C4 = ap * math.tan(ap) / math.cos(ap) ** 2
    C5 = 1.0 / math.sin(bp) ** 4
    C6 = (math.cos(bp) / math.sin(bp) + A1) ** 2
    C7 = A1 * (HALF_PI + 1.0)
    s1 = max(2.0 * C1 / e2 ** 2, math.sqrt(5.0 * C2) / (2.0 * e2), math.sqrt(C4 / 8.0) / e2)
    s2 = max(math.sqrt(3.0 * C5) / (2.0 * e1), math.sqrt(5.0 * C7) / e1, 8.0 * C6 / e1 ** 2)
    R0 = max(s1, s2)
    return AdmissibilityConstants(C1, C2, C4, C5, C6, C7, s1, s2, R0,
                                  13.5 * R0 * weight.betaMax, 13.5 * R0 * weight.betaMin)


def con_constants(weight: CarlemanWeight, R0: float) -> dict:
    """``C9 .. C12`` for the bound on the connecting-region kernel.

    ``C12`` is the nominal combination ``C10 + C11/(8 R0^2)``;
    ``C12_swapped = C11 + C10/(8 R0^2)`` is the combination that the
    ``n^2`` bookkeeping actually supports and is reported as well.
    """
    x = np.concatenate([np.linspace(weight.aPrime, weight.bPrime, 2001),
                        np.linspace(-weight.bPrime, -weight.aPrime, 2001)])
    d1 = weight.derivative(x, 1)
    d2 = weight.derivative(x, 2)
    d4 = weight.derivative(x, 4)
    C9 = 2.0 * float(np.max(np.abs(d2)))
    C10 = float(np.max(np.abs(d4) + np.abs(np.sin(x) / np.cos(x) ** 3 * d1)))
    bmax = weight.sup_norm(0)
    d1max2 = float(np.max(d1 * d1))
    C11 = 1.25 * bmax / R0 ** 2 + C10 / (32.0 * R0 ** 2) + (1.0 / R0 + C9) * d1max2
    return {"C9": C9, "C10": C10, "C11": C11,
            "C12": C10 + C11 / (8.0 * R0 ** 2),
            "C12_swapped": C11 + C10 / (8.0 * R0 ** 2)}


def admissible_s(R0: float, T: float, n: int) -> float:
    return R0 * max(T + T * T, T * T * n)


@dataclass(frozen=True)
class CarlemanParams:
    """``s = sFactor * R0 * max(T + T^2, T^2 n)``."""

    s: float
    T: float
    n: int
    sFactor: float
    R0: float

    @property
    def admissible(self) -> bool:
        return self.s >= admissible_s(self.R0, self.T, self.n) * (1 - 1e-12)


def make_params(weight: CarlemanWeight, T: float, n: int, sFactor: float = 1.0) -> CarlemanParams:
    if not T > 0 or n < 1 or not sFactor > 0:
        raise ValueError("need T > 0, n >= 1 and sFactor > 0")
    R0 = admissibility_constants(weight).R0
    return CarlemanParams(sFactor * admissible_s(R0, T, n), T, n, sFactor, R0)


# --------------------------------------------------------- solutions, kernels

@dataclass(frozen=True, eq=False)
class ModeSolution:
    """``g(t, x) = sum_l c_l e^{-lambda_l t} sqrt(cos x) v_{n,l}(x)``.

    A solution of ``d_t g = M_n g``; values and ``x``-derivatives are
    evaluated analytically from the Legendre recurrences.
    """

    n: int
    degrees: np.ndarray
    coeffs: np.ndarray

    @property
    def eigenvalues(self):
        return self.degrees * (self.degrees + 1.0) - self.n ** 2

    def _tables(self, x):
        x = np.asarray(x, dtype=float)
        L = int(self.degrees.max())
        v = eigenfunction_table(self.n, L, x)[self.degrees - self.n]
        dv = eigenfunction_dx_table(self.n, L, x)[self.degrees - self.n]
        c = np.cos(x)
        r = np.sqrt(c)
        w = r * v
        dw = r * dv - 0.5 * np.sin(x) / r * v
        return w, dw

    def evaluate(self, t, x):
        """``(g, g_x, g_t, g_xx)`` on the grid ``t`` by ``x``."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        w, dw = self._tables(x)
        E = np.exp(-np.outer(t, self.eigenvalues)) * self.coeffs
        g = E @ w
        gx = E @ dw
        gt = -(E * self.eigenvalues) @ w
        q = PotentialQn(self.n)(x)
        gxx = gt + q * g  # M_n g = g_t for an exact solution
        return g, gx, gt, gxx


def mode_solution(n: int, ell, coeffs=None) -> ModeSolution:
    degrees = np.atleast_1d(np.asarray(ell, dtype=int))
    if np.any(degrees < n) or n < 1:
        raise ValueError("need 1 <= n <= l")
    c = np.ones(degrees.size) if coeffs is None else np.asarray(coeffs, dtype=float)
    return ModeSolution(n, degrees, c)


def _phi_parts(t, x, s, T, weight):
    th, dth, d2th = theta_eval(t, T)
    b = [weight.derivative(x, k) for k in range(5)]
    return th, dth, d2th, b


def split_identity_check(sol: ModeSolution, s: float, T: float, weight: CarlemanWeight,
                         t=None, x=None, gxx_spectral=None) -> float:
    """Relative residual of ``P+ z + P- z = e^{-phi} (g_t - M_n g)``.

    ``z = g e^{-phi}`` and its derivatives come from the product rule. The
    common factor ``e^{-min phi}`` is divided out so nothing underflows.
    ``gxx_spectral`` (same shape as ``g``) replaces the analytic ``g_xx``;
    pass it to test a numerically differentiated solution.
    """
    if t is None:
        t = make_time_grid(T, 20, clearance=0.0, points_per_panel=4).nodes
    if x is None:
        x = make_latitude_rule(120, kind="legendre-x").nodes
    g, gx, gt, gxx = sol.evaluate(t, x)
    if gxx_spectral is not None:
        gxx = gxx_spectral
    th, dth, _, b = _phi_parts(t, x, s, T, weight)
    phi = s * np.outer(th, b[0])
    phit = s * np.outer(dth, b[0])
    phix = s * np.outer(th, b[1])
    phixx = s * np.outer(th, b[2])
    q = PotentialQn(sol.n)(x)
    E = np.exp(-(phi - phi.min()))
    z = g * E
    zx = (gx - phix * g) * E
    zxx = (gxx - 2 * phix * gx - phixx * g + phix * phix * g) * E
    zt = (gt - phit * g) * E
    Pplus = -(zxx - q * z) + (phit - phix * phix) * z
    Pminus = zt - 2.0 * zx * phix - phixx * z
    rhs = E * (gt - (gxx - q * g))
    scale = max(np.abs(Pplus).max(), np.abs(Pminus).max(), np.abs(rhs).max())
    if scale == 0:
        return 0.0
    return float(np.abs(Pplus + Pminus - rhs).max() / scale)


def kernel_general(x, z, zx, s, th, dth, d2th, weight: CarlemanWeight, n: int):
    """Kernel of the integrated product ``int P+ z P- z`` for any ``x``.

    ``K = -2 s theta beta'' z_x^2 + s [theta beta''''/2 + theta beta' q_n'
    - theta'' beta/2 + 2 s theta beta'^2 (theta' - s theta^2 beta'')] z^2``.
    ``th``, ``dth``, ``d2th`` broadcast against ``x`` (e.g. column vectors).
    """
    b0, b1, b2, _, b4 = (weight.derivative(x, k) for k in range(5))
    dq = PotentialQn(n).derivative(x)
    coef = s * (th * b4 / 2 + th * b1 * dq - d2th * b0 / 2
                + 2 * s * th * b1 * b1 * (dth - s * th * th * b2))
    return -2 * s * th * b2 * zx * zx + coef * z * z


def kernel_literal(x, z, zx, s, th, dth, d2th, weight: CarlemanWeight, n: int):
    """Region-wise closed-form kernels, written out term by term.

    On the connecting and polar regions these agree with
    :func:`kernel_general`. On the degenerate band this form differs
    from the integrated product; it is kept for comparison only.
    """
    x = np.broadcast_to(np.asarray(x, dtype=float), np.broadcast(z, x).shape)
    reg = weight.region(x)
    A1, A2, A3 = weight.A1, weight.A2, weight.A3
    n2 = n * n
    out = np.asarray(kernel_general(x, z, zx, s, th, dth, d2th, weight, n), dtype=float).copy()
    th = np.broadcast_to(th, x.shape)
    dth = np.broadcast_to(dth, x.shape)
    d2th = np.broadcast_to(d2th, x.shape)
    z = np.broadcast_to(z, x.shape)
    zx = np.broadcast_to(zx, x.shape)
    m = reg == 0
    if np.any(m):
        xs, T1, T1p, T2p, zz, zzx = x[m], th[m], dth[m], d2th[m], z[m] ** 2, zx[m] ** 2
        c, sn = np.cos(xs), np.sin(xs)
        slope = -np.tan(xs) - xs + A3
        out[m] = (s * T1 * ((2 / c ** 2 + 2) * zzx + (sn ** 2 / (2 * c ** 4) + xs * sn / (2 * c ** 3)) * zz)
                  + (2 * n2 * s * T1 / c ** 2 + 2 * s ** 3 * T1 ** 3 * (1 / c ** 2 + 1) * slope ** 2) * zz
                  + s * T1 * (A3 * (2 * n2 - 0.5) / c ** 4 + 2 * s * T1p * slope ** 2
                              - 2 * n2 * xs * np.tan(xs) / c ** 2) * zz
                  - s * T2p / 2 * (np.log(c) - xs ** 2 / 2 + A3 * (xs + 1)) * zz)
    m = reg == 2
    if np.any(m):
        xs, T1, T1p, T2p, zz, zzx = x[m], th[m], dth[m], d2th[m], z[m] ** 2, zx[m] ** 2
        sn, c = np.sin(xs), np.cos(xs)
        sg = np.sign(xs)
        slope = c / sn + A1 * sg
        out[m] = (2 * s * T1 / sn ** 2 * (zzx + zz) + 2 * s ** 3 * T1 ** 3 / sn ** 2 * slope ** 2 * zz
                  + (2 * s ** 2 * T1 * T1p * slope ** 2
                     - s * T2p / 2 * (np.log(np.abs(sn)) + A1 * np.abs(xs) + A2)) * zz
                  + (-3 * s * T1 / sn ** 4 + s * T1 * (2 * n2 - 0.5) / c ** 2 * (1 + A1 * sg * np.tan(xs))) * zz)
    return out


def kernel_eval(x, z, zx, s, th, dth, d2th, weight: CarlemanWeight, n: int, form: str = "general"):
    if form == "general":
        return kernel_general(x, z, zx, s, th, dth, d2th, weight, n)
    if form == "literal":
        return kernel_literal(x, z, zx, s, th, dth, d2th, weight, n)
    raise ValueError(f"unknown kernel form {form!r}")


def _composite(lo, hi, panels, order):
    xi, wi = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    return (mid + half * xi).ravel(), (half * wi).ravel()


def _region_rules(weight: CarlemanWeight, order: int, panels: int = 40):
    """Composite Gauss rules on each region; ``e^{-2 phi}`` is sharply peaked
    at the minimum of ``beta`` so a single Gauss rule per piece is not enough."""
    ap, bp = weight.aPrime, weight.bPrime
    spans = {
        "deg": [(-ap, ap)],
        "con": [(-bp, -ap), (ap, bp)],
        "bdy": [(-HALF_PI, -bp), (bp, HALF_PI)],
    }
    out = {}
    for name, pieces in spans.items():
        parts = [_composite(lo, hi, panels, order) for lo, hi in pieces]
        out[name] = (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))
    return out


def _weighted_fields(sol, s, T, weight, t, x):
    g, gx, gt, gxx = sol.evaluate(t, x)
    th, dth, d2th = theta_eval(t, T)
    b0 = weight.derivative(x, 0)
    b1 = weight.derivative(x, 1)
    phi = s * np.outer(th, b0)
    phix = s * np.outer(th, b1)
    return g, gx, gt, gxx, phi, phix, th[:, None], dth[:, None], d2th[:, None]


def splitting_product(sol: ModeSolution, s: float, T: float, weight: CarlemanWeight,
                      order: int = 16, steps: int = 60, form: str = "general") -> dict:
    """``int int P+ z P- z`` against the sum of region kernels.

    Both sides carry the factor ``e^{2 min phi}``. Returns the two values
    and their relative difference.
    """
    tg = make_time_grid(T, steps, clearance=0.0, points_per_panel=6)
    rules = _region_rules(weight, order)
    x = np.concatenate([rules[k][0] for k in ("bdy", "con", "deg")])
    wx = np.concatenate([rules[k][1] for k in ("bdy", "con", "deg")])
    g, gx, gt, gxx, phi, phix, th, dth, d2th = _weighted_fields(sol, s, T, weight, tg.nodes, x)
    shift = phi.min()
    E = np.exp(-(phi - shift))
    phit = s * dth * weight.derivative(x, 0)
    phixx = s * th * weight.derivative(x, 2)
    q = PotentialQn(sol.n)(x)
    z = g * E
    zx = (gx - phix * g) * E
    zxx = (gxx - 2 * phix * gx - phixx * g + phix * phix * g) * E
    zt = (gt - phit * g) * E
    Pp = -(zxx - q * z) + (phit - phix * phix) * z
    Pm = zt - 2 * zx * phix - phixx * z
    W = np.outer(tg.weights, wx)
    lhs = float(np.sum(W * Pp * Pm))
    K = kernel_eval(x, z, zx, s, th, dth, d2th, weight, sol.n, form=form)
    rhs = float(np.sum(W * K))
    return {"product": lhs, "kernels": rhs,
            "rel_diff": abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)}


def kernel_bounds_check(sol: ModeSolution, params: CarlemanParams, weight: CarlemanWeight,
                        order: int = 16, steps: int = 60, swapped_c12: bool = False) -> dict:
    """Integrated lower bounds on the band and the caps, upper bound on the connector.

    Margins are relative: ``(bigger side - smaller side) / |reference side|``;
    all three should be non-negative at admissible ``s``.
    """
    if not params.admissible:
        raise ValueError(f"s = {params.s} is below the admissibility threshold")
    s, T, n = params.s, params.T, sol.n
    tg = make_time_grid(T, steps, clearance=0.0, points_per_panel=6)
    rules = _region_rules(weight, order)
    th_mid = theta_eval(np.array([0.5 * T]), T)[0][0]
    cc = con_constants(weight, params.R0)
    C12 = cc["C12_swapped"] if swapped_c12 else cc["C12"]
    out = {"s": s, "T": T, "n": n, "C9": cc["C9"], "C12": C12}
    for name, (x, wx) in rules.items():
        g, gx, gt, gxx, phi, phix, th, dth, d2th = _weighted_fields(sol, s, T, weight, tg.nodes, x)
        # each inequality is region-local, so each region gets its own scale
        shift = s * th_mid * float(weight.derivative(x, 0).min())
        E = np.exp(-(phi - shift))
        z = g * E
        zx = (gx - phix * g) * E
        W = np.outer(tg.weights, wx)
        K = kernel_general(x, z, zx, s, th, dth, d2th, weight, n)
        if name == "deg":
            ref = np.sum(W * (4 * s * th * zx ** 2 + weight.eta2 ** 2 * s ** 3 * th ** 3 * z ** 2))
            big = np.sum(W * K)
        elif name == "bdy":
            ref = np.sum(W * (2 * s * th * zx ** 2 + 2 * s * th * z ** 2
                              + 0.5 * weight.eta1 ** 2 * s ** 3 * th ** 3 * z ** 2))
            big = np.sum(W * K)
        else:
            ref = np.sum(W * np.abs(K))
            big = np.sum(W * (cc["C9"] * s * th * zx ** 2 + C12 * s ** 3 * th ** 3 * z ** 2))
        out[name] = {"kernel_side": float(big if name != "con" else ref),
                     "bound_side": float(ref if name != "con" else big),
                     "margin": float((big - ref) / ref) if ref > 0 else 0.0}
    out["ok"] = all(out[k]["margin"] >= 0 for k in ("deg", "bdy", "con"))
    return out


def carleman_ratio(sol: ModeSolution, params: CarlemanParams, weight: CarlemanWeight,
                   a: float, b: float, order: int = 12, steps: int = 60, panels: int = 40) -> float:
    """``log`` of (observed term on ``omega_{a,b}``) / (weighted energy), ``R1 = 1``.

    Computed with log-sum-exp over the space-time quadrature.
    """
    s, T = params.s, params.T
    tg = make_time_grid(T, steps, clearance=0.0, points_per_panel=6)
    cuts = [-HALF_PI, -b, -a, a, b, HALF_PI]
    parts = [_composite(lo, hi, panels, order) for lo, hi in zip(cuts[:-1], cuts[1:]) if hi > lo]
    x = np.concatenate([p[0] for p in parts])
    wx = np.concatenate([p[1] for p in parts])
    g, gx, _, _ = sol.evaluate(tg.nodes, x)
    th = theta_eval(tg.nodes, T)[0][:, None]
    logE = -2.0 * s * th * weight.derivative(x, 0)
    logW = np.log(np.outer(tg.weights, wx))
    with np.errstate(divide="ignore"):
        energy = np.log(s * th * gx ** 2 + s ** 3 * th ** 3 * g ** 2)
        observed = np.log(s ** 3 * th ** 3 * g ** 2)
    ax = np.abs(x)
    mask = np.broadcast_to((ax > a) & (ax < b), g.shape)
    lhs = logsumexp(energy + logE + logW)
    rhs = logsumexp(np.where(mask, observed + logE + logW, -np.inf))
    return float(rhs - lhs)


def carleman_diagnostic(calibration, held_out, weight: CarlemanWeight, a: float, b: float,
                        T: float, sFactor: float = 1.0, **kw) -> dict:
    """Calibrate ``R1_hat`` as the smallest ratio on one family, test another.

    Held-out solutions pass when their ratio is at least ``R1_hat / 2``.
    Ratios are handled as logarithms.
    """
    if not calibration or not held_out:
        raise ValueError("both families must be non-empty")

    def logs(family):
        return [carleman_ratio(sol, make_params(weight, T, sol.n, sFactor), weight, a, b, **kw)
                for sol in family]

    cal = logs(calibration)
    held = logs(held_out)
    log_r1 = min(cal)
    passed = [h >= log_r1 - math.log(2.0) for h in held]
    return {"log_R1_hat": log_r1, "calibration": cal, "held_out": held,
            "passed": passed, "ok": all(passed)}
