"""Normalized associated Legendre functions and the eigenfunctions built on them.

All values come from three-term recurrences on fully normalized functions,
so no factorial is ever formed. The Condon-Shortley phase is kept:
``Pbar_n^n(t) = (-1)^n c_n (1 - t^2)^(n/2)`` with ``c_n > 0``.

For a frequency ``n`` the eigenfunctions of ``L_n`` are
``v_{n,l}(x) = Pbar_l^{|n|}(sin x)``, orthonormal for ``cos x dx``, with
eigenvalue ``l(l+1) - n^2``. Negative ``n`` uses the ``|n|`` functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import QuadratureRule, HALF_PI

__all__ = [
    "eigenvalue",
    "eigenvalues",
    "legendre_table",
    "legendre_table_dt",
    "normalized_legendre",
    "eigenfunction_table",
    "eigenfunction_dx_table",
    "eigenfunction_vnl",
    "ModeBasis",
    "mode_basis",
    "spherical_harmonic",
    "concentrating_wn",
    "wn_nominal_log_amplitude",
    "endpoint_decay_check",
    "endpoint_slope_n0",
]


def eigenvalue(ell: int, n: int) -> int:
    """``l(l+1) - n^2``, the eigenvalue of ``-L_n`` on ``v_{n,l}``."""
    if ell < abs(n):
        raise ValueError(f"need l >= |n|, got l={ell}, n={n}")
    return ell * (ell + 1) - n * n


def eigenvalues(n: int, L: int) -> np.ndarray:
    ells = np.arange(abs(n), L + 1)
    return (ells * (ells + 1) - n * n).astype(float)


def _seed(n: int, t: np.ndarray) -> np.ndarray:
    """``Pbar_n^n(t)`` by the product recurrence from ``Pbar_0^0 = 1/sqrt 2``."""
    root = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
    p = np.full_like(t, 1.0 / math.sqrt(2.0))
    for k in range(1, n + 1):
        p = -math.sqrt((2 * k + 1) / (2 * k)) * root * p
    return p


def legendre_table(n: int, L: int, t) -> np.ndarray:
    """Rows ``Pbar_l^n(t)`` for ``l = n..L``; shape ``(L - n + 1,) + t.shape``."""
    if n < 0:
        raise ValueError("legendre_table needs n >= 0")
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0):
        raise ValueError("argument outside [-1, 1]")
    if L < n:
        return np.empty((0,) + t.shape)
    out = np.empty((L - n + 1,) + t.shape)
    out[0] = _seed(n, t)
    if L > n:
        out[1] = math.sqrt(2 * n + 3) * t * out[0]
    for ell in range(n + 2, L + 1):
        d = ell * ell - n * n
        a = math.sqrt((4 * ell * ell - 1) / d)
        b = math.sqrt((2 * ell + 1) * ((ell - 1) ** 2 - n * n) / ((2 * ell - 3) * d))
        out[ell - n] = a * t * out[ell - n - 1] - b * out[ell - n - 2]
    return out


def legendre_table_dt(n: int, L: int, t) -> np.ndarray:
    """``(1 - t^2) d/dt Pbar_l^n(t)`` for ``l = n..L``.

    Uses ``(1-t^2) P' = -l t P_l + sqrt((2l+1)/(2l-1) (l^2-n^2)) P_{l-1}``.
    """
    t = np.asarray(t, dtype=float)
    P = legendre_table(n, L, t)
    out = np.empty_like(P)
    for ell in range(n, L + 1):
        i = ell - n
        out[i] = -ell * t * P[i]
        if ell > n:
            out[i] += math.sqrt((2 * ell + 1) / (2 * ell - 1) * (ell * ell - n * n)) * P[i - 1]
    return out


def normalized_legendre(ell: int, n: int, t):
    """Fully normalized ``Pbar_l^n(t)``, unit ``L^2(-1, 1)`` norm, CS phase."""
    if not 0 <= n <= ell:
        raise ValueError(f"need 0 <= n <= l, got l={ell}, n={n}")
    t_arr = np.asarray(t, dtype=float)
    val = legendre_table(n, ell, t_arr)[-1]
    return float(val) if val.ndim == 0 else val


def eigenfunction_table(n: int, L: int, x) -> np.ndarray:
    """``v_{n,l}(x)`` for ``l = |n|..L`` at arbitrary latitudes ``x``."""
    return legendre_table(abs(n), L, np.sin(np.asarray(x, dtype=float)))


def eigenfunction_dx_table(n: int, L: int, x) -> np.ndarray:
    """``d/dx v_{n,l}(x)`` for ``l = |n|..L``; ``x`` strictly inside (-pi/2, pi/2)."""
    x = np.asarray(x, dtype=float)
    return legendre_table_dt(abs(n), L, np.sin(x)) / np.cos(x)


def eigenfunction_vnl(ell: int, n: int, rule: QuadratureRule) -> np.ndarray:
    """Samples of ``v_{n,l}`` at the rule nodes."""
    if ell < abs(n):
        raise ValueError(f"need l >= |n|, got l={ell}, n={n}")
    return eigenfunction_table(n, ell, rule.nodes)[-1]


@dataclass(frozen=True, eq=False)
class ModeBasis:
    """Eigenpairs of ``-L_n`` for ``l = |n|..L`` sampled on a rule.

    ``samples[i]`` holds ``v_{n, |n|+i}`` at ``rule.nodes``.
    """

    n: int
    L: int
    eigenvalues: np.ndarray
    samples: np.ndarray
    rule: QuadratureRule

    def __post_init__(self):
        for name in ("eigenvalues", "samples"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(abs(self.n), self.L + 1)

    def gram(self) -> np.ndarray:
        return (self.samples * self.rule.weights) @ self.samples.T

    def synthesize(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs) @ self.samples


def mode_basis(n: int, L: int, rule: QuadratureRule) -> ModeBasis:
    if L < abs(n):
        raise ValueError(f"truncation L={L} below |n|={abs(n)}")
    return ModeBasis(n=n, L=L, eigenvalues=eigenvalues(n, L),
                     samples=eigenfunction_table(n, L, rule.nodes), rule=rule)


def spherical_harmonic(ell: int, n: int, x, y):
    """``W_{l,n}(x, y) = v_{n,l}(x) e^{iny} / sqrt(2 pi)``, unit norm for ``cos x dx dy``.

    For ``n < 0`` the ``|n|`` latitude profile is used with the phase
    ``(-1)^n``, matching ``P_l^{-n} = (-1)^n (l-n)!/(l+n)! P_l^n``.
    """
    if ell < abs(n):
        raise ValueError(f"need l >= |n|, got l={ell}, n={n}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    prof = legendre_table(abs(n), ell, np.sin(x))[-1]
    if n < 0 and n % 2:
        prof = -prof
    val = prof * np.exp(1j * n * y) / math.sqrt(2.0 * math.pi)
    return complex(val) if val.ndim == 0 else val


def wn_nominal_log_amplitude(n: int) -> float:
    """``log`` of ``sqrt((2n+1)!) / (2^n n!)``, the nominal amplitude of ``w_n``.

    With this amplitude ``int w_n^2 cos x dx`` over the whole interval
    equals 2, not 1; see :func:`concentrating_wn`.
    """
    return 0.5 * math.lgamma(2 * n + 2) - n * math.log(2.0) - math.lgamma(n + 1)


def concentrating_wn(n: int, rule: QuadratureRule, keep_phase: bool = True) -> np.ndarray:
    """Unit-norm samples of ``(-1)^n cos^n x``, the highest-weight profile.

    The amplitude is evaluated in log space and then renormalized by the
    rule so that ``inner_weighted(w, w) == 1``.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    logc = np.log(np.cos(rule.nodes))
    w = np.exp(n * logc + wn_nominal_log_amplitude(n))
    w /= math.sqrt(float(np.dot(rule.weights, w * w)))
    if keep_phase and n % 2:
        w = -w
    return w


def endpoint_decay_check(ell: int, n: int, delta: float) -> float:
    """``|v_{n,l}(pi/2 - delta)| / sqrt(cos(pi/2 - delta))`` for ``n != 0``."""
    if n == 0 or ell < abs(n):
        raise ValueError(f"need l >= |n| >= 1, got l={ell}, n={n}")
    if not 0 < delta < 0.1:
        raise ValueError("delta must lie in (0, 0.1)")
    x = HALF_PI - delta
    v = legendre_table(abs(n), ell, np.array([math.sin(x)]))[-1, 0]
    return abs(v) / math.sqrt(math.cos(x))


def endpoint_slope_n0(ell: int, delta: float) -> float:
    """``|v'_{0,l}(pi/2 - delta)|``, which tends to 0 as ``delta -> 0``."""
    x = HALF_PI - delta
    return float(abs(eigenfunction_dx_table(0, ell, np.array([x]))[-1, 0]))
