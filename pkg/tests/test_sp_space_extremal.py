import math

import numpy as np
import pytest

from spapprox.errors import DescriptorError, InvalidCoefficient, UnsupportedFamily, ZeroEntry
from spapprox.extremal import (
    constrained_nterm,
    ellipsoid_gamma_error,
    kolmogorov_width_table,
    nterm,
    nterm_unit,
    widths,
)
from spapprox.psi_system import build_system
from spapprox.sp_space import SpElement, psi_derivative, psi_transform, sp_norm, tail_error

from helpers import nterm_equal_exponent


def geometric():
    return build_system({"mode": "sequence", "rule": {"family": "geometric", "ratio": 0.5}})


# -- elements ---------------------------------------------------------------

def test_text_round_trip():
    f = SpElement({(1, -2): 0.5 + 0.25j, (0, 3): -1.0}, dimension=2)
    assert SpElement.from_text(f.to_text(), 2) == f


def test_zero_coefficients_rejected():
    with pytest.raises(InvalidCoefficient):
        SpElement({1: 0.0})
    with pytest.raises(InvalidCoefficient):
        SpElement({1: float("nan")})


def test_norms_and_tails():
    f = SpElement({1: 3.0, 2: 4.0})
    assert sp_norm(f, 2) == pytest.approx(5.0)
    assert sp_norm(f, 1) == pytest.approx(7.0)
    assert tail_error(f, [1], 2) == pytest.approx(4.0)


def test_psi_integral_then_derivative_is_identity():
    psi = geometric()
    f = SpElement({1: 1.0, 3: -2j, 6: 0.1})
    g = psi_transform(psi_transform(f, psi, "integrate"), psi, "differentiate")
    for k, c in f.items():
        assert g[k] == pytest.approx(c, rel=1e-15)


def test_zero_entries():
    with pytest.raises(ZeroEntry):
        build_system({"mode": "table", "table": [[1, 1.0], [2, 0.0]]})
    psi = build_system({"mode": "table", "table": [[1, 1.0], [2, 0.0]], "allow_zero": True})
    res = psi_derivative(SpElement({1: 2.0, 2: 1.0}), psi)
    assert res.derivative == SpElement({1: 2.0})
    assert res.free_term == SpElement({2: 1.0})


# -- extremal characteristics ----------------------------------------------

def test_nterm_geometric_value():
    # [TRIVIAL] psi_k = 2^-k, n = 1, p = q = 1: max_s (s-1)/(2^{s+1}-2) = 1/6 at s = 2
    res = nterm(geometric(), 1, 1, 1)
    assert res.value == pytest.approx(1 / 6, rel=1e-14)
    assert res.witness == 2


@pytest.mark.parametrize("p", [1.0, 2.0, 3.5])
@pytest.mark.parametrize("n", [0, 1, 3, 7])
def test_nterm_equal_exponent_against_explicit_max(p, n):
    moduli = [1 / (1 + k) ** 1.5 for k in range(40)]
    psi = build_system({"mode": "table", "table": [[k + 1, m] for k, m in enumerate(moduli)]})
    assert nterm(psi, n, p, p).value == pytest.approx(nterm_equal_exponent(moduli, n, p), rel=1e-12)


def test_unit_system():
    assert nterm_unit(5, 2, 2).value == 1.0
    res = nterm_unit(6, 2, 1)
    assert res.witness in (res.details["floor_point"], res.details["floor_point"] + 1)
    with pytest.raises(UnsupportedFamily):
        nterm_unit(2, 1, 2)


def test_gamma_error_and_widths():
    psi = geometric()
    # excluding the first two indices leaves psi_3 = 1/8 for q <= p
    assert ellipsoid_gamma_error(psi, [1, 2], 2, 1).value == pytest.approx(1 / 8)
    assert widths(psi, 3, 2, 2).value == pytest.approx(1 / 16)
    # q > p: tail norm with exponent pq/(q-p); p = 1, q = 2 gives l_2 of the tail
    tail = math.sqrt(sum(4.0 ** -k for k in range(3, 200)))
    assert ellipsoid_gamma_error(psi, [1, 2], 1, 2).value == pytest.approx(tail, rel=1e-12)


def test_kolmogorov_table_steps():
    psi = build_system({"mode": "table", "table": [[1, 1.0], [2, 0.5], [3, 0.5], [4, 0.25]]})
    rows = kolmogorov_width_table(psi, 2, 3)
    assert [(r.m_low, r.m_high, r.value) for r in rows] == [(0, 0, 1.0), (1, 2, 0.5), (3, 3, 0.25)]
    with pytest.raises(DescriptorError):
        kolmogorov_width_table(psi, 0.5, 2)


def test_constrained_not_below_unconstrained():
    psi = build_system({"mode": "sequence", "rule": {"family": "power", "r": 1.5}})
    for n in (1, 2, 4):
        free = nterm(psi, n, 2, 1).value
        blocked = constrained_nterm(psi, n, 2, 1, "G1").value
        assert blocked >= free * (1 - 1e-12)


def test_nterm_sandwich_branch_is_monotone():
    psi = build_system({"mode": "sequence", "rule": {"family": "power", "r": 2}})
    values = [nterm(psi, n, 1, 2).value for n in range(1, 6)]
    assert np.all(np.diff(values) <= 1e-15)
