"""Penalized HUM controls for each mode and their assembly into a 2D control.

For a mode with data ``f0`` the adjoint state ending at ``p`` is
``phi(t) = sum_l p_l e^{-lambda_l (T - t)} v_l`` and the control is
``u = 1_omega phi``. Its effect on the final state is ``G p`` with the
controllability Gramian ``G``, so the penalized problem reduces to

    (G + eps I) p = -D f0,      f(T) = D f0 + G p = eps (G + eps I)^{-1} D f0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .legendre import ModeBasis, eigenfunction_table
from .numerics import make_latitude_rule
from .observability import ControlRegion, spatial_overlap_matrix, time_factor
from .spectral import ModeControl, ModeState, duhamel_mode

__all__ = [
    "hum_gramian",
    "ModeHUM",
    "solve_mode_control",
    "panel_values",
    "control_trajectory",
    "masking_error",
    "Control2D",
    "assemble_control_2d",
    "cost_at_reduction",
]


def hum_gramian(basis: ModeBasis, region: ControlRegion, T: float, S=None) -> np.ndarray:
    """``G_{ll'} = int_0^T int_omega e^{-lambda_l (T-t)} e^{-lambda_l' (T-t)} v_l v_l'``.

    Built from the backward adjoint directly: the time integral is taken
    in ``tau = T - t`` on its own, not borrowed from the observability code.
    """
    if not T > 0:
        raise ValueError(f"T must be positive, got {T!r}")
    if S is None:
        S = spatial_overlap_matrix(basis, region)
    lam = basis.eigenvalues
    mu = lam[:, None] + lam[None, :]
    # int_0^T e^{-mu (T - t)} dt, written from the t = T end
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(mu > 0, (1.0 - np.exp(-mu * T)) / np.where(mu > 0, mu, 1.0), T)
    return S * theta


def _solve_penalized(G, rhs, eps):
    """``(G + eps I) p = rhs`` after scaling by ``diag(G)^{-1/2}``."""
    d = np.sqrt(np.clip(np.diag(G), 0.0, None))
    d = np.where(d > 0, d, 1.0)
    E = 1.0 / d
    A = G * np.outer(E, E) + eps * np.diag(E * E)
    try:
        q = linalg.solve(A, E * rhs, assume_a="pos")
    except linalg.LinAlgError:
        q = linalg.lstsq(A, E * rhs)[0]
    return E * q


@dataclass(frozen=True, eq=False)
class ModeHUM:
    """Outcome of one penalized solve."""

    n: int
    epsilon: float
    p: np.ndarray
    predicted_final: np.ndarray
    free_final: np.ndarray
    control: ModeControl
    cost: float

    @property
    def final_norm(self) -> float:
        return float(np.linalg.norm(self.predicted_final))


def panel_values(p, basis: ModeBasis, S, T: float, edges) -> np.ndarray:
    """Piecewise-constant coefficients of the projected control on each panel.

    The value for degree ``l`` on ``[t_k, t_{k+1}]`` is the average of
    ``u_l(t)`` against the Duhamel kernel ``e^{-lambda_l (T - t)}``, so the
    exact panel integration reproduces ``G p`` at time ``T``.
    """
    lam = basis.eigenvalues
    edges = np.asarray(edges, dtype=float)
    width = np.diff(edges)
    right = edges[1:]

    def frac(mu, w):
        mu = np.asarray(mu, dtype=float)
        safe = np.where(mu > 0, mu, 1.0)
        return np.where(mu > 0, -np.expm1(-mu * w) / safe, w)

    mu = lam[:, None] + lam[None, :]
    out = np.empty((edges.size - 1, lam.size), dtype=np.result_type(p, float))
    for k in range(edges.size - 1):
        num = frac(mu, width[k]) * (np.exp(-lam * (T - right[k])) * p)[None, :]
        out[k] = (S * num).sum(axis=1) / frac(lam, width[k])
    return out


def solve_mode_control(f0: ModeState, region: ControlRegion, T: float, epsilon: float,
                       steps: int = 50, S=None) -> ModeHUM:
    """Penalized HUM for one mode; the control comes on ``steps`` equal panels."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    basis = f0.basis
    if S is None:
        S = spatial_overlap_matrix(basis, region)
    G = hum_gramian(basis, region, T, S=S)
    Df0 = f0.coeffs * np.exp(-basis.eigenvalues * T)
    if not np.any(f0.coeffs):
        p = np.zeros_like(Df0)
    else:
        p = _solve_penalized(G, -Df0, epsilon)
    edges = np.linspace(0.0, T, steps + 1)
    vals = panel_values(p, basis, S, T, edges)
    ctl = ModeControl(f0.n, edges, vals, basis)
    cost = float(np.real(np.conj(p) @ G @ p))
    return ModeHUM(f0.n, epsilon, p, Df0 + G @ p, Df0, ctl, cost)


def control_trajectory(p, basis: ModeBasis, S, T: float, t) -> np.ndarray:
    """Projected control coefficients ``u(t) = S (e^{-lambda (T - t)} p)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return (np.exp(-np.outer(T - t, basis.eigenvalues)) * p) @ S.T


def masking_error(values, basis: ModeBasis, region: ControlRegion, order: int | None = None) -> float:
    """Relative change when coefficients are synthesized, cut to ``omega`` and re-projected.

    The coefficients of ``1_omega sum_l c_l v_l`` are ``S c``; the gap to
    ``c`` is what the sample-space projection costs.
    """
    order = order or max(64, 2 * basis.L + 8)
    rule = make_latitude_rule(order)
    V = eigenfunction_table(basis.n, basis.L, rule.nodes)
    mask = region.contains(rule.nodes)
    vals = np.atleast_2d(values)
    samples = vals @ V
    back = (samples * mask * rule.weights) @ V.T
    den = np.linalg.norm(vals)
    return float(np.linalg.norm(back - vals) / den) if den > 0 else 0.0


@dataclass(frozen=True, eq=False)
class Control2D:
    """Per-mode panel controls sharing one time partition, cut to ``omega``."""

    modes: dict
    edges: np.ndarray
    region: ControlRegion
    L: int

    @property
    def frequencies(self):
        return sorted(self.modes)

    def mode_cost(self, n: int) -> float:
        """``sum_k dt_k int_omega |sum_l u_l v_l|^2 cos x dx`` for mode ``n``."""
        ctl = self.modes[n]
        S = spatial_overlap_matrix(ctl.basis, self.region)
        vals = ctl.values
        per = np.real(np.einsum("ki,ij,kj->k", np.conj(vals), S, vals))
        return float(np.diff(self.edges) @ per)

    def cost(self) -> float:
        return float(sum(self.mode_cost(n) for n in self.frequencies))

    def samples(self, k: int, x, y) -> np.ndarray:
        """Control on panel ``k`` at ``x`` by ``y``; zero outside ``omega``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros((x.size, y.size), dtype=complex)
        for n in self.frequencies:
            prof = self.modes[n].values[k] @ eigenfunction_table(n, self.L, x)
            out += np.outer(prof, np.exp(1j * n * y)) / math.sqrt(2.0 * math.pi)
        return out * self.region.contains(x)[:, None]


def assemble_control_2d(per_mode: dict, region: ControlRegion) -> Control2D:
    """Collect per-mode controls; all must share the time panels and truncation."""
    if not per_mode:
        raise ValueError("no modes given")
    ns = sorted(per_mode)
    first = per_mode[ns[0]]
    for n in ns:
        c = per_mode[n]
        if c.n != n:
            raise ValueError(f"control stored under {n} is for mode {c.n}")
        if c.basis.L != first.basis.L or not np.array_equal(c.edges, first.edges):
            raise ValueError("per-mode controls disagree on truncation or time panels")
    return Control2D(dict(per_mode), first.edges.copy(), region, first.basis.L)


def cost_at_reduction(f0: ModeState, region: ControlRegion, T: float, target: float = 0.1,
                      max_decades: int = 60) -> dict:
    """Smallest tried ``eps`` reaching ``||f(T)|| <= target ||D f0||``, and its cost.

    ``eps`` runs down from the largest Gramian eigenvalue in decades.
    """
    basis = f0.basis
    S = spatial_overlap_matrix(basis, region)
    G = hum_gramian(basis, region, T, S=S)
    Df0 = f0.coeffs * np.exp(-basis.eigenvalues * T)
    goal = target * np.linalg.norm(Df0)
    top = float(np.linalg.eigvalsh(G).max())
    for k in range(max_decades + 1):
        eps = top * 10.0 ** (-k)
        p = _solve_penalized(G, -Df0, eps)
        fin = Df0 + G @ p
        if np.linalg.norm(fin) <= goal:
            return {"epsilon": eps, "cost": float(np.real(np.conj(p) @ G @ p)),
                    "final_norm": float(np.linalg.norm(fin)), "reached": True}
    return {"epsilon": eps, "cost": float(np.real(np.conj(p) @ G @ p)),
            "final_norm": float(np.linalg.norm(fin)), "reached": False}
