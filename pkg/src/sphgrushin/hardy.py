"""Numerical checks of the Hardy-Poincare inequality on (-pi/2, pi/2).

    int w^2 / cos^2 x dx  <=  4 int (w')^2 dx,     w(+-pi/2) = 0,

and of the bound ``||S f||^2 <= 4 ||f||^2`` for the tail operator
``(S f)(x) = (1/cos x) int_x^{pi/2} f``, which is how the inequality is
proved. Plain integrals use ``"legendre-x"`` rules.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial import legendre as npleg

from .legendre import eigenfunction_table
from .numerics import HALF_PI, QuadratureRule, derivatives, make_latitude_rule

__all__ = [
    "hardy_pair",
    "hardy_pair_Uv",
    "hardy_pair_cos_power",
    "hardy_constant_probe",
    "operator_S",
    "half_rule",
    "tan_tail_bound",
]


def hardy_pair(w, rule: QuadratureRule, cos_power: float = 1.0):
    """Return ``(int w^2/cos^2, 4 int (w')^2)`` by the rule.

    ``cos_power`` is the rate at which ``w`` vanishes at the endpoints; it
    is factored out before differentiating (see ``numerics.derivatives``).
    """
    w = np.asarray(w, dtype=float)
    c = np.cos(rule.nodes)
    d1, _ = derivatives(w, rule, cos_power)
    pw = rule.plain_weights
    lhs = float(np.dot(pw, w * w / (c * c)))
    rhs = 4.0 * float(np.dot(pw, d1 * d1))
    return lhs, rhs


def hardy_pair_Uv(n: int, ell: int, rule: QuadratureRule):
    """Hardy pair for ``w = sqrt(cos x) v_{n,l}(x)``, ``n >= 1``."""
    if n < 1 or ell < n:
        raise ValueError(f"need 1 <= n <= l, got n={n}, l={ell}")
    v = eigenfunction_table(n, ell, rule.nodes)[-1]
    w = np.sqrt(np.cos(rule.nodes)) * v
    return hardy_pair(w, rule, cos_power=n + 0.5)


def hardy_pair_cos_power(k: int, rule: QuadratureRule):
    if k < 1:
        raise ValueError("k must be >= 1")
    return hardy_pair(np.cos(rule.nodes) ** k, rule, cos_power=k)


def hardy_constant_probe(pairs) -> float:
    """Largest ``lhs / rhs`` over an iterable of Hardy pairs."""
    ratios = [lhs / rhs for lhs, rhs in pairs if rhs > 0]
    if not ratios:
        raise ValueError("empty or trivial family")
    return max(ratios)


def half_rule(order: int) -> QuadratureRule:
    """Gauss rule in ``x`` on ``(0, pi/2)``, the domain of :func:`operator_S`."""
    return make_latitude_rule(order, kind="legendre-x", lo=0.0, hi=HALF_PI)


def operator_S(f, rule: QuadratureRule, x=None) -> np.ndarray:
    """``(1/cos x) int_x^{pi/2} f(t) dt`` for samples ``f`` on a half rule.

    ``f`` is expanded in Legendre polynomials through the Gauss rule and the
    tail integral is taken from the exact antiderivative, so it can be
    evaluated anywhere in ``[0, pi/2)``. ``x`` defaults to the rule nodes.
    """
    if rule.kind != "legendre-x":
        raise ValueError("operator_S needs a 'legendre-x' rule")
    f = np.asarray(f, dtype=float)
    xi, wi = rule.native, rule.native_weights
    N = xi.size
    coef = (2.0 * np.arange(N) + 1.0) / 2.0 * (npleg.legvander(xi, N - 1).T @ (wi * f))
    anti = npleg.legint(coef)
    half = 0.5 * (rule.hi - rule.lo)
    x = rule.nodes if x is None else np.asarray(x, dtype=float)
    u = (x - 0.5 * (rule.hi + rule.lo)) / half
    tail = half * (npleg.legval(1.0, anti) - npleg.legval(u, anti))
    return tail / np.cos(x)


def tan_tail_bound(x) -> np.ndarray:
    """``(pi/2 - x) tan x``, which stays below 1 on ``[0, pi/2)``."""
    x = np.asarray(x, dtype=float)
    return (HALF_PI - x) * np.tan(x)
