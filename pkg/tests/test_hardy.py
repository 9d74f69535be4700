import math

import numpy as np
import pytest

from sphgrushin.hardy import (half_rule, hardy_constant_probe, hardy_pair, hardy_pair_cos_power,
                              hardy_pair_Uv, operator_S, tan_tail_bound)
from sphgrushin.numerics import make_latitude_rule

RX = make_latitude_rule(200, kind="legendre-x")


def test_closed_form_pairs():
    c = np.cos(RX.nodes)
    lhs, rhs = hardy_pair(c, RX)
    assert abs(lhs - math.pi) < 1e-8 and abs(rhs - 2 * math.pi) < 1e-8
    lhs, rhs = hardy_pair(c * c, RX, cos_power=2)
    assert abs(lhs - math.pi / 2) < 1e-8 and abs(rhs - 2 * math.pi) < 1e-8
    assert hardy_pair(np.zeros_like(c), RX) == (0.0, 0.0)


def test_cos_power_ratios():
    # int cos^{2k-2} over 4k^2 int cos^{2k-2} sin^2 = 1/(2k) by the Wallis recurrence
    ratios = []
    for k in range(1, 11):
        lhs, rhs = hardy_pair_cos_power(k, RX)
        ratios.append(lhs / rhs)
        assert abs(lhs / rhs - 1 / (2 * k)) < 1e-10
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
    assert hardy_constant_probe([hardy_pair_cos_power(1, RX)]) == pytest.approx(0.5, abs=1e-12)


def test_Uv_family_below_one():
    pairs = [hardy_pair_Uv(n, ell, RX) for n in range(1, 6) for ell in range(n, 11)]
    assert all(lhs <= rhs * (1 + 1e-8) for lhs, rhs in pairs)
    assert hardy_constant_probe(pairs) <= 1.0
    with pytest.raises(ValueError):
        hardy_constant_probe([])
    with pytest.raises(ValueError):
        hardy_pair_Uv(0, 3, RX)


def test_operator_S_examples():
    h = half_rule(80)
    x = h.nodes
    Sf = operator_S(np.cos(x), h)
    assert np.abs(Sf - (1 - np.sin(x)) / np.cos(x)).max() < 1e-12
    assert abs(operator_S(np.cos(x), h, x=np.array([0.0]))[0] - 1.0) < 1e-14
    assert np.all(operator_S(np.zeros_like(x), h) == 0)
    with pytest.raises(ValueError):
        operator_S(np.ones(16), make_latitude_rule(16))


def test_operator_S_bound_random():
    h = half_rule(120)
    rng = np.random.default_rng(99)
    u = 4 * h.nodes / math.pi - 1
    for _ in range(100):
        f = np.polynomial.legendre.legval(u, rng.standard_normal(12))
        Sf = operator_S(f, h)
        assert h.integrate_plain(Sf * Sf) <= 4 * h.integrate_plain(f * f)


def test_tan_tail_bound():
    x = np.linspace(0, math.pi / 2 - 1e-9, 10001)
    assert np.all(tan_tail_bound(x) <= 1.0)
    assert tan_tail_bound(0.0) == 0.0
