"""Unitary maps to unweighted spaces and the operators they produce.

``U`` multiplies by ``sqrt(cos x)`` and sends the ``cos x dx`` space to
plain ``L^2(-pi/2, pi/2)``; it turns ``L_n`` into ``M_n = d^2/dx^2 - q_n``.
``V`` substitutes ``t = sin x`` and turns ``L_0`` into the Legendre
operator ``((1 - t^2) w')'`` on ``(-1, 1)``.
"""
from __future__ import annotations

import numpy as np

from .numerics import QuadratureRule, derivatives, _legendre_derivatives

__all__ = [
    "PotentialQn",
    "potential_qn",
    "map_U",
    "map_U_adjoint",
    "map_V",
    "map_V_adjoint",
    "apply_M0",
    "apply_Mn",
    "hardy_admissibility",
]


class PotentialQn:
    """``q_n(x) = (n^2 - 1/4) tan^2 x - 1/2``."""

    def __init__(self, n: int):
        if int(n) != n or n < 1:
            raise ValueError(f"n must be a positive integer, got {n!r}")
        self.n = int(n)

    def __call__(self, x):
        tan = np.tan(np.asarray(x, dtype=float))
        return (self.n ** 2 - 0.25) * tan * tan - 0.5

    def derivative(self, x):
        """``q_n'(x) = (2 n^2 - 1/2) sin x / cos^3 x``."""
        x = np.asarray(x, dtype=float)
        return (2.0 * self.n ** 2 - 0.5) * np.sin(x) / np.cos(x) ** 3

    def __repr__(self):
        return f"PotentialQn(n={self.n})"


def potential_qn(n: int, x):
    return PotentialQn(n)(x)


def map_U(v, rule: QuadratureRule) -> np.ndarray:
    return np.sqrt(np.cos(rule.nodes)) * np.asarray(v)


def map_U_adjoint(w, rule: QuadratureRule) -> np.ndarray:
    return np.asarray(w) / np.sqrt(np.cos(rule.nodes))


def _require_sin_full(rule: QuadratureRule):
    if rule.kind != "sin" or rule.lo != -np.pi / 2 or rule.hi != np.pi / 2:
        raise ValueError("V needs a full-interval 'sin' rule so t-nodes are Gauss nodes")


def map_V(v, rule: QuadratureRule):
    """Relabel latitude samples as samples on ``t = sin x``.

    Returns ``(t, w)``: the image node set and the unchanged values. The
    plain weights on ``t`` are ``rule.weights``, so norms are preserved
    exactly.
    """
    _require_sin_full(rule)
    return rule.t.copy(), np.array(v, copy=True)


def map_V_adjoint(w, rule: QuadratureRule) -> np.ndarray:
    _require_sin_full(rule)
    return np.array(w, copy=True)


def apply_M0(w, rule: QuadratureRule) -> np.ndarray:
    """``((1 - t^2) w')' = (1 - t^2) w'' - 2 t w'`` at the ``t`` nodes."""
    _require_sin_full(rule)
    t = rule.native
    w = np.asarray(w, dtype=float)
    d1, d2 = _legendre_derivatives(w, rule)
    return (1.0 - t * t) * d2 - 2.0 * t * d1


def apply_Mn(w, n: int, rule: QuadratureRule, cos_power=None) -> np.ndarray:
    """``w'' - q_n w`` for ``n >= 1``.

    ``cos_power`` defaults to ``1/2 + n % 2``, the endpoint behaviour of
    ``U`` applied to the mode basis.
    """
    if n == 0:
        raise ValueError("apply_Mn is for n >= 1; use apply_M0 for n = 0")
    q = 0.5 + abs(n) % 2 if cos_power is None else cos_power
    _, d2 = derivatives(w, rule, q)
    return d2 - PotentialQn(abs(n))(rule.nodes) * np.asarray(w)


def hardy_admissibility(w, rule: QuadratureRule) -> float:
    """``int w^2 / cos^2 x dx``; finite for ``w = U v`` with ``v`` in a mode ``n >= 1``."""
    w = np.asarray(w, dtype=float)
    c = np.cos(rule.nodes)
    return float(np.dot(rule.plain_weights, w * w / (c * c)))
