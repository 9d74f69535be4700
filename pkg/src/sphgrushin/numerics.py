"""Quadrature rules, time grids, inner products and spectral differentiation.

Latitude rules live on the open interval (-pi/2, pi/2). Two constructions
are provided:

``"sin"``
    Gauss-Legendre in ``t = sin x``. Since ``cos x dx = dt`` the weighted
    integral of any polynomial in ``sin x`` of degree ``<= 2*order - 1`` is
    exact. This is the default for everything spectral.
``"legendre-x"``
    Gauss-Legendre directly in ``x``. Weighted weights are ``w_i cos x_i``.
    Use it for unweighted integrals of functions that are smooth in ``x``
    (Hardy quotients, ``int 1 dx``), where the ``"sin"`` rule converges
    only algebraically.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg

HALF_PI = 0.5 * np.pi

__all__ = [
    "QuadratureRule",
    "TimeGrid",
    "make_latitude_rule",
    "default_order",
    "inner_weighted",
    "inner_plain",
    "norm_weighted",
    "make_time_grid",
    "derivatives",
]


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and cos-weighted weights on a latitude interval.

    ``weights`` integrate against ``cos x dx``; :attr:`plain_weights`
    integrate against ``dx``. ``native`` holds the Gauss-Legendre abscissae
    in the variable the rule was built in (``t`` for ``"sin"``, ``x`` for
    ``"legendre-x"``) mapped to ``[-1, 1]``; :func:`derivatives` needs them.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    lo: float = -HALF_PI
    hi: float = HALF_PI
    native: np.ndarray = field(default=None, repr=False)
    native_weights: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("nodes", "weights", "native", "native_weights"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        x = self.nodes
        if x.shape != self.weights.shape:
            raise ValueError("nodes and weights differ in length")
        if np.any(np.diff(x) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if x[0] <= -HALF_PI or x[-1] >= HALF_PI:
            raise ValueError("nodes must lie in the open interval (-pi/2, pi/2)")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")

    def __len__(self):
        return self.nodes.size

    @property
    def order(self) -> int:
        return self.nodes.size

    @property
    def t(self) -> np.ndarray:
        """``sin`` of the nodes, i.e. the image node set on (-1, 1)."""
        return np.sin(self.nodes)

    @property
    def plain_weights(self) -> np.ndarray:
        return self.weights / np.cos(self.nodes)

    def integrate(self, values) -> float:
        """``int f(x) cos x dx`` over the rule's interval."""
        return float(np.dot(self.weights, _as_samples(values, self)))

    def integrate_plain(self, values) -> float:
        """``int f(x) dx`` over the rule's interval."""
        return float(np.dot(self.plain_weights, _as_samples(values, self)))


def default_order(L: int, max_n: int = 0) -> int:
    """Default latitude rule order for truncation degree ``L``."""
    return max(64, 2 * (L + abs(max_n)))


def make_latitude_rule(order: int, kind: str = "sin", lo: float = -HALF_PI,
                       hi: float = HALF_PI) -> QuadratureRule:
    """Gauss rule of ``order`` points on ``(lo, hi)`` for the ``cos x`` measure.

    >>> rule = make_latitude_rule(16)
    >>> round(rule.integrate(np.ones(16)), 12)
    2.0
    """
    if int(order) != order or order < 2:
        raise ValueError(f"order must be an integer >= 2, got {order!r}")
    if not -HALF_PI <= lo < hi <= HALF_PI:
        raise ValueError(f"need -pi/2 <= lo < hi <= pi/2, got ({lo}, {hi})")
    order = int(order)
    xi, wi = npleg.leggauss(order)
    if kind == "sin":
        tlo, thi = np.sin(lo), np.sin(hi)
        half = 0.5 * (thi - tlo)
        t = 0.5 * (thi + tlo) + half * xi
        nodes = np.arcsin(t)
        weights = half * wi
    elif kind == "legendre-x":
        half = 0.5 * (hi - lo)
        nodes = 0.5 * (hi + lo) + half * xi
        weights = half * wi * np.cos(nodes)
    else:
        raise ValueError(f"unknown rule kind {kind!r}")
    return QuadratureRule(nodes=nodes, weights=weights, kind=kind, lo=float(lo),
                          hi=float(hi), native=xi, native_weights=wi)


def _as_samples(f, rule: QuadratureRule) -> np.ndarray:
    f = np.asarray(f)
    if f.shape[-1] != rule.nodes.size:
        raise ValueError(
            f"sample length {f.shape[-1]} does not match rule order {rule.nodes.size}")
    return f


def inner_weighted(f, g, rule: QuadratureRule) -> float:
    """``int f g cos x dx`` by the rule."""
    f = _as_samples(f, rule)
    g = _as_samples(g, rule)
    return float(np.sum(rule.weights * f * g))


def inner_plain(f, g, rule: QuadratureRule) -> float:
    """``int f g dx`` by the rule (weights divided by ``cos`` of the nodes)."""
    f = _as_samples(f, rule)
    g = _as_samples(g, rule)
    return float(np.sum(rule.plain_weights * f * g))


def norm_weighted(f, rule: QuadratureRule) -> float:
    return float(np.sqrt(max(inner_weighted(f, f, rule), 0.0)))


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Composite Gauss rule on a subinterval of ``(0, T)``.

    ``edges`` are the panel boundaries; every node lies strictly inside a
    panel, hence strictly inside ``(0, T)``.
    """

    T: float
    nodes: np.ndarray
    weights: np.ndarray
    edges: np.ndarray
    points_per_panel: int

    def __post_init__(self):
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("time nodes must be strictly increasing")
        if self.nodes[0] <= 0 or self.nodes[-1] >= self.T:
            raise ValueError("time nodes must lie strictly inside (0, T)")
        if np.any(self.weights <= 0):
            raise ValueError("time weights must be positive")

    @property
    def steps(self) -> int:
        return self.edges.size - 1

    @property
    def panel_widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.asarray(values)))


def make_time_grid(T: float, steps: int, clearance: float = 1e-3, interval=None,
                   points_per_panel: int = 8) -> TimeGrid:
    """Composite Gauss-Legendre grid with ``steps`` equal panels.

    By default the grid covers ``[clearance*T, (1-clearance)*T]``; pass
    ``interval=(t0, t1)`` to cover a subinterval of ``[0, T]`` instead.
    ``clearance=0`` is allowed: Gauss nodes never sit on panel edges, so the
    nodes still avoid ``t = 0`` and ``t = T``.
    """
    if not T > 0:
        raise ValueError(f"T must be positive, got {T!r}")
    if int(steps) != steps or steps < 1:
        raise ValueError(f"steps must be a positive integer, got {steps!r}")
    if interval is None:
        if not 0 <= clearance < 0.5:
            raise ValueError(f"clearance must lie in [0, 1/2), got {clearance!r}")
        t0, t1 = clearance * T, (1.0 - clearance) * T
    else:
        t0, t1 = map(float, interval)
        if not 0 <= t0 < t1 <= T:
            raise ValueError(f"interval {interval!r} not inside [0, {T}]")
    edges = np.linspace(t0, t1, int(steps) + 1)
    xi, wi = npleg.leggauss(points_per_panel)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xi[None, :]).ravel()
    weights = (half[:, None] * wi[None, :]).ravel()
    return TimeGrid(T=float(T), nodes=nodes, weights=weights, edges=edges,
                    points_per_panel=points_per_panel)


def _legendre_derivatives(G: np.ndarray, rule: QuadratureRule):
    """Derivatives of ``G`` w.r.t. the rule's native variable on [-1, 1].

    ``G`` is expanded in Legendre polynomials by the Gauss rule itself
    (exact for polynomials of degree < order) and differentiated termwise.
    """
    xi, wi = rule.native, rule.native_weights
    N = xi.size
    V = npleg.legvander(xi, N - 1)
    scale = (2.0 * np.arange(N) + 1.0) / 2.0
    coef = scale * (V.T @ (wi * G))
    d1 = npleg.legval(xi, npleg.legder(coef, 1))
    d2 = npleg.legval(xi, npleg.legder(coef, 2))
    return d1, d2


def derivatives(f, rule: QuadratureRule, cos_power: float = 0.0):
    """First and second ``x``-derivatives of samples ``f`` at the rule nodes.

    ``f`` is written as ``cos(x)**cos_power * G`` and ``G`` is differentiated
    spectrally in the rule's native variable. Choose ``cos_power`` so that
    ``G`` is smooth up to the endpoints; e.g. ``n % 2`` for eigenfunctions
    of ``L_n`` on a ``"sin"`` rule, or ``1/2 + n % 2`` for their images under
    ``U``.
    """
    f = np.asarray(_as_samples(f, rule), dtype=float)
    q = float(cos_power)
    x = rule.nodes
    c, s = np.cos(x), np.sin(x)
    G = f / c**q
    g1, g2 = _legendre_derivatives(G, rule)
    if rule.kind == "sin":
        tlo, thi = np.sin(rule.lo), np.sin(rule.hi)
        k = 2.0 / (thi - tlo)
        Gt, Gtt = k * g1, k * k * g2
        c2 = c * c
        H = c2 * Gt - q * s * G
        d1 = c ** (q - 1.0) * H
        d2 = c ** (q - 2.0) * (c2 * (c2 * Gtt - (q + 2.0) * s * Gt - q * G) - (q - 1.0) * s * H)
    else:
        k = 2.0 / (rule.hi - rule.lo)
        Gx, Gxx = k * g1, k * k * g2
        d1 = c ** (q - 1.0) * (c * Gx - q * s * G)
        d2 = c ** (q - 2.0) * (c * c * Gxx - 2.0 * q * s * c * Gx
                               + (q * (q - 1.0) * s * s - q * c * c) * G)
    return d1, d2
