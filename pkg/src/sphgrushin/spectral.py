"""Mode decomposition, exact spectral evolution and Duhamel integration.

A 2D field on ``Omega = (-pi/2, pi/2) x [0, 2 pi)`` is stored by its
coefficients in the orthonormal basis ``W_{l,n} = v_{|n|,l}(x) e^{iny}/sqrt(2 pi)``.
Frequency ``n`` and ``-n`` share the latitude basis; a field is real iff
``c_{l,-n} = conj(c_{l,n})``. All sums over frequencies run in ascending
``n`` so results are reproducible bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .legendre import ModeBasis, mode_basis, eigenfunction_table
from .numerics import QuadratureRule, derivatives

__all__ = [
    "ModeState",
    "Field2D",
    "ModeControl",
    "project_mode",
    "evolve_mode",
    "apply_Ln",
    "duhamel_mode",
    "duhamel_evolve",
    "dissipation_check",
    "fourier_component",
    "reconstruct_from_components",
    "panel_factors",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class ModeState:
    """Coefficients of a function in ``H_n`` w.r.t. ``v_{n,l}``, ``l = |n|..L``."""

    n: int
    coeffs: np.ndarray
    basis: ModeBasis

    def __post_init__(self):
        c = np.array(self.coeffs)
        if c.shape != (self.basis.size,):
            raise ValueError(
                f"expected {self.basis.size} coefficients for n={self.n}, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def samples(self) -> np.ndarray:
        return self.coeffs @ self.basis.samples

    def with_coeffs(self, coeffs) -> "ModeState":
        return ModeState(self.n, coeffs, self.basis)

    @classmethod
    def unit(cls, basis: ModeBasis, ell: int) -> "ModeState":
        c = np.zeros(basis.size)
        c[ell - abs(basis.n)] = 1.0
        return cls(basis.n, c, basis)


def project_mode(f, basis: ModeBasis) -> ModeState:
    """``H_n`` projection of samples ``f`` on the basis span."""
    f = np.asarray(f)
    if f.shape != basis.rule.nodes.shape:
        raise ValueError("samples do not sit on the basis rule nodes")
    coeffs = basis.samples @ (basis.rule.weights * f)
    return ModeState(basis.n, coeffs, basis)


def evolve_mode(state: ModeState, t: float) -> ModeState:
    """Free evolution ``e^{t L_n}``: each coefficient picks up ``e^{-lambda t}``."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t!r}")
    return state.with_coeffs(state.coeffs * np.exp(-state.basis.eigenvalues * t))


def apply_Ln(f, n: int, rule: QuadratureRule, cos_power=None) -> np.ndarray:
    """``(1/cos x)(cos x f')' - n^2 tan^2 x f`` by spectral differentiation.

    Evaluated as ``f'' - tan x f' - n^2 tan^2 x f``. ``cos_power`` is the
    endpoint behaviour factored out before differentiating; the default
    ``|n| % 2`` fits every element of the mode basis.
    """
    q = abs(n) % 2 if cos_power is None else cos_power
    d1, d2 = derivatives(f, rule, q)
    tan = np.tan(rule.nodes)
    return d2 - tan * d1 - n * n * tan * tan * np.asarray(f)


def dissipation_check(state0: ModeState, t: float, T: float):
    """Both sides of ``||g_n(T)|| <= e^{-|n|(T-t)} ||g_n(t)||``."""
    if not 0 < t < T:
        raise ValueError(f"need 0 < t < T, got t={t}, T={T}")
    lhs = evolve_mode(state0, T).norm()
    rhs = math.exp(-abs(state0.n) * (T - t)) * evolve_mode(state0, t).norm()
    return lhs, rhs


def panel_factors(lam: np.ndarray, a, b, t: float) -> np.ndarray:
    """``int_a^b e^{-lam (t - s)} ds`` for each panel ``[a, b]`` and eigenvalue.

    Returns shape ``(panels, len(lam))``; ``lam = 0`` gives ``b - a``.
    """
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[:, None]
    lam = np.asarray(lam, dtype=float)[None, :]
    width = b - a
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(lam > 0, -np.expm1(-lam * width) / np.where(lam > 0, lam, 1.0), width)
    return np.exp(-lam * (t - b)) * frac


@dataclass(frozen=True, eq=False)
class ModeControl:
    """Piecewise-constant-in-time mode coefficients of ``1_omega u``.

    ``values[k]`` holds the coefficients on panel ``[edges[k], edges[k+1]]``.
    """

    n: int
    edges: np.ndarray
    values: np.ndarray
    basis: ModeBasis

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        v = np.array(self.values)
        if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
            raise ValueError("edges must be strictly increasing with at least one panel")
        if v.shape != (e.size - 1, self.basis.size):
            raise ValueError(f"values must have shape {(e.size - 1, self.basis.size)}, got {v.shape}")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "values", v)

    @property
    def horizon(self) -> float:
        return float(self.edges[-1])

    def cost(self) -> float:
        """``int int |u|^2`` for this mode (orthonormal basis, exact in time)."""
        return float(np.sum(np.diff(self.edges)[:, None] * np.abs(self.values) ** 2))

    @classmethod
    def zero(cls, basis: ModeBasis, T: float, steps: int = 1) -> "ModeControl":
        edges = np.linspace(0.0, T, steps + 1)
        return cls(basis.n, edges, np.zeros((steps, basis.size)), basis)


def duhamel_mode(state0: ModeState, control: ModeControl | None, t: float) -> ModeState:
    """State at time ``t`` of ``g' = L_n g + u`` with piecewise-constant ``u``.

    Each panel is integrated exactly: a panel ``[a, b]`` with value ``u``
    adds ``e^{-lambda (t - b)} u (1 - e^{-lambda (b - a)}) / lambda``.
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t!r}")
    lam = state0.basis.eigenvalues
    c = state0.coeffs * np.exp(-lam * t)
    if control is None:
        return state0.with_coeffs(c)
    if control.n != state0.n or control.basis.size != state0.basis.size:
        raise ValueError("control and state live on different modes")
    a = np.minimum(control.edges[:-1], t)
    b = np.minimum(control.edges[1:], t)
    keep = b > a
    if np.any(keep):
        F = panel_factors(lam, a[keep], b[keep], t)
        c = c + np.sum(F * control.values[keep], axis=0)
    return state0.with_coeffs(c)


@dataclass(frozen=True, eq=False)
class Field2D:
    """Truncated field: ``modes[n]`` for ``-N <= n <= N`` (missing modes are zero)."""

    modes: dict
    N: int
    L: int

    def __post_init__(self):
        for n, st in self.modes.items():
            if abs(n) > self.N or st.basis.L != self.L or st.n != n:
                raise ValueError(f"mode {n} inconsistent with truncation N={self.N}, L={self.L}")

    @property
    def frequencies(self):
        return sorted(self.modes)

    def norm2(self) -> float:
        return float(sum(self.modes[n].norm() ** 2 for n in self.frequencies))

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    def mode_norms(self) -> dict:
        return {n: self.modes[n].norm() for n in self.frequencies}

    def evolve(self, t: float) -> "Field2D":
        return Field2D({n: evolve_mode(self.modes[n], t) for n in self.frequencies}, self.N, self.L)

    def is_real(self, tol: float = 1e-12) -> bool:
        for n in self.frequencies:
            other = self.modes.get(-n)
            if other is None:
                if np.any(np.abs(self.modes[n].coeffs) > tol):
                    return False
            elif np.any(np.abs(self.modes[n].coeffs - np.conj(other.coeffs)) > tol):
                return False
        return True

    def samples(self, x, y) -> np.ndarray:
        """Field values on the tensor grid ``x`` (latitudes) by ``y`` (longitudes)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros((x.size, y.size), dtype=complex)
        for n in self.frequencies:
            prof = self.modes[n].coeffs @ eigenfunction_table(n, self.L, x)
            out += np.outer(prof, np.exp(1j * n * y)) / math.sqrt(TWO_PI)
        return out

    @classmethod
    def from_coefficients(cls, coeffs: dict, N: int, L: int, rule: QuadratureRule,
                          bases: dict | None = None) -> "Field2D":
        """Build from ``{n: coefficient vector}``; bases are shared across ``+-n``."""
        bases = {} if bases is None else bases
        modes = {}
        for n in sorted(coeffs):
            key = abs(n)
            if key not in bases:
                bases[key] = mode_basis(key, L, rule)
            b = bases[key]
            if n < 0:
                b = ModeBasis(n=n, L=L, eigenvalues=b.eigenvalues, samples=b.samples, rule=rule)
            modes[n] = ModeState(n, np.asarray(coeffs[n]), b)
        return cls(modes, N, L)


def duhamel_evolve(f0: Field2D, controls: dict | None, T: float) -> Field2D:
    """Final state at ``T`` of the controlled equation, mode by mode.

    ``controls`` maps ``n`` to a :class:`ModeControl` whose horizon must be ``T``.
    """
    controls = controls or {}
    out = {}
    for n in f0.frequencies:
        ctl = controls.get(n)
        if ctl is not None and not math.isclose(ctl.horizon, T, rel_tol=1e-12, abs_tol=1e-14):
            raise ValueError(f"control horizon {ctl.horizon} does not match T={T}")
        out[n] = duhamel_mode(f0.modes[n], ctl, T)
    for n in controls:
        if n not in f0.modes:
            raise ValueError(f"control on mode {n} absent from the initial field")
    return Field2D(out, f0.N, f0.L)


def fourier_component(g2d, n: int, y) -> np.ndarray:
    """``g_n(x) = sum_j g(x, y_j) e^{-i n y_j} dy`` on a uniform ``y`` grid of ``[0, 2 pi)``.

    The conjugate pairing makes :func:`reconstruct_from_components` an exact
    inverse for band-limited data.
    """
    g2d = np.asarray(g2d)
    y = np.asarray(y, dtype=float)
    if y.size < 2 * abs(n) + 2:
        raise ValueError(f"need at least {2 * abs(n) + 2} longitude samples for n={n}")
    dy = TWO_PI / y.size
    return (g2d * np.exp(-1j * n * y)[None, :]).sum(axis=1) * dy


def reconstruct_from_components(components: dict, y) -> np.ndarray:
    """``g(x, y) = (1/2 pi) sum_n g_n(x) e^{iny}``, ascending ``n``."""
    y = np.asarray(y, dtype=float)
    out = None
    for n in sorted(components):
        term = np.outer(components[n], np.exp(1j * n * y)) / TWO_PI
        out = term if out is None else out + term
    return out
