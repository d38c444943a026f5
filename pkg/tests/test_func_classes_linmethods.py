import math

import numpy as np
import pytest

from spapprox.errors import DescriptorError, ParameterOutOfRange, RegimeMismatch
from spapprox.func_classes import (
    ConvexDecayFunction,
    characteristics,
    classify,
    exact_class_values,
    in_B,
    locate_shell,
    order_formula,
    ratio_validation,
    trend,
)
from spapprox.identities import power_majorant
from spapprox.linmethods import (
    ABEL_POISSON_ZERO_BLOCK,
    apply_method,
    generalized_derivative,
    method_error,
    method_multipliers,
    method_rate_report,
    poisson_norm,
    tap_multiplier,
    tap_multiplier_derivative_form,
)
from spapprox.sp_space import SpElement, sp_norm

from helpers import brute_lattice_count

POWER2 = {"family": "power", "r": 2}
EXP = {"family": "exp", "lam": 1}


# -- characteristics --------------------------------------------------------

def test_power_characteristics():
    # t^-r halves at 2^{1/r} t, so mu = 1/(2^{1/r} - 1) and alpha = 1/r
    for t in (1.0, 7.0, 300.0):
        c = characteristics(POWER2, t)
        assert c.eta == pytest.approx(math.sqrt(2) * t, rel=1e-12)
        assert c.mu == pytest.approx(1 / (math.sqrt(2) - 1), rel=1e-10)
        assert c.alpha == pytest.approx(0.5, rel=1e-6)


def test_exponential_characteristics():
    # e^-t halves after log 2: mu = t/log 2, psi/|psi'| = 1
    c = characteristics(EXP, 50.0)
    assert c.eta == pytest.approx(50 + math.log(2), rel=1e-13)
    assert c.mu == pytest.approx(50 / math.log(2), rel=1e-9)
    assert c.psi_over_derivative == pytest.approx(1.0, rel=1e-12)


def test_characteristics_domain():
    with pytest.raises(DescriptorError):
        characteristics(POWER2, 0.5)


def test_trend_labels():
    assert trend([1, 2, 3, 4]) == "up"
    assert trend([4, 3, 2, 1]) == "down"
    assert trend([1, 1, 1]) == "flat"
    assert trend([1, 3, 0, 4, 2, 5, 1]) == "mixed"


@pytest.mark.parametrize("rule,label", [
    ({"family": "power", "r": 1.5}, "M_C"),
    ({"family": "exp", "lam": 1}, "M^c_inf"),
    ({"family": "exp", "lam": 1, "s": 0.5}, "M'_inf"),
    ({"family": "exp", "lam": 1, "s": 2}, "M''_inf"),
    ({"family": "log", "r": 1}, "M_0"),
    ({"family": "powerlog", "r": 2, "eps": 1}, "M_C"),
])
def test_classification(rule, label):
    assert classify(rule).label == label


def test_delta2_membership():
    assert in_B(classify({"family": "power", "r": 24}))
    assert not in_B(classify(EXP))


def test_custom_decay_function():
    psi = ConvexDecayFunction(lambda t: -3.0 * np.log(t), family="cubic")
    assert classify(psi).label == "M_C"
    assert characteristics(psi, 10.0).mu == pytest.approx(1 / (2 ** (1 / 3) - 1), rel=1e-9)


@pytest.mark.parametrize("d,r", [(1, math.inf), (2, 1), (2, math.inf), (3, 1)])
def test_locate_shell(d, r):
    for n in (1, 5, 40, 333):
        m, lo, hi = locate_shell(n, d, r)
        assert lo == brute_lattice_count(d, r, m - 1)
        assert hi == brute_lattice_count(d, r, m)
        assert lo <= n < hi


def test_ellipsoid_width_is_exact_for_q_le_p():
    # for q <= p the width is the (n+1)-th rearranged modulus
    ov = order_formula("width", 2, 1, POWER2, 9)
    assert ov.value == pytest.approx(10.0 ** -2)


def test_order_ratio_on_lattice():
    n_values = [4, 16, 64, 256, 1024]
    exact = exact_class_values("e_n", 2, 1, POWER2, n_values, d=2, r=math.inf)
    order = [order_formula("e_n", 2, 1, POWER2, n, d=2, r=math.inf).value for n in n_values]
    rep = ratio_validation(exact, order, n_values)
    assert rep.passes, rep.ratios


def test_order_argument_forms_agree_up_to_constant():
    for n in (10, 100, 1000):
        vol = order_formula("e_n", 1, 2, POWER2, n, d=2, r=1).value
        lit = order_formula("e_n", 1, 2, POWER2, n, d=2, r=1, argument="literal").value
        assert 0.05 < vol / lit < 20


def test_ratio_validation_mismatch():
    with pytest.raises(RegimeMismatch):
        ratio_validation([1.0], [1.0, 2.0], [1])
    with pytest.raises(DescriptorError):
        order_formula("bad", 1, 1, POWER2, 3)


# -- linear methods ---------------------------------------------------------

def test_tap_forms_agree():
    for rho in (0.0, 0.3, 0.9, 0.999):
        for r in (1, 2, 5):
            for nu in (0, 1, 7, 61, 150):
                a = tap_multiplier(nu, r, rho)
                b = tap_multiplier_derivative_form(nu, r, rho)
                assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


def test_tap_order_one_is_abel_poisson():
    tap = method_multipliers("tap", rho=0.7, r=1)
    ap = method_multipliers("abel_poisson", rho=0.7, s=1)
    assert all(tap(nu) == pytest.approx(ap(nu), rel=1e-14) for nu in range(40))
    assert ap(0) == ABEL_POISSON_ZERO_BLOCK


def test_fejer_and_partial_errors():
    f = SpElement({(1, 0): 1.0, (1, 1): 2.0, (0, 3): 4.0}, dimension=2)
    assert method_error(f, method_multipliers("partial", n=2), 1) == pytest.approx(4.0)
    # Fejer at n = 2: block 1 keeps 2/3, block 2 keeps 1/3, block 3 dropped
    assert method_error(f, method_multipliers("fejer", n=2), 1) == pytest.approx(1 / 3 + 4 / 3 + 4)
    out = apply_method(f, method_multipliers("fejer", n=2))
    assert out[(1, 1)] == pytest.approx(2 / 3)


def test_derivatives():
    f = SpElement({(0, 0): 5.0, (1, 0): 1.0, (2, 1): 1.0}, dimension=2)
    round1 = generalized_derivative(f, 1, "round")
    bracket1 = generalized_derivative(f, 1, "bracket")
    assert round1 == bracket1
    assert generalized_derivative(f, 2, "bracket")[(2, 1)] == pytest.approx(6.0)
    with pytest.raises(ParameterOutOfRange):
        generalized_derivative(f, 1, "other")


def test_poisson_norm_and_bad_rho():
    f = SpElement({1: 1.0, 2: 1.0})
    assert poisson_norm(f, 0.5, 1) == pytest.approx(0.75)
    with pytest.raises(ParameterOutOfRange):
        method_multipliers("tap", rho=1.0, r=1)
    with pytest.raises(ParameterOutOfRange):
        method_multipliers("fejer", n=-1)


def test_rate_report_fejer_columns():
    f = SpElement({k: k ** -2.0 for k in range(1, 60)})
    rep = method_rate_report(f, "fejer", power_majorant(1.0), [2, 4, 8, 16])
    lo, hi = rep.ratio_range["error/omega"]
    assert 0 < lo <= hi < 50
    assert set(rep.columns) == {"error", "partial_derivative_over_n", "omega"}


def test_rate_report_tap():
    f = SpElement({k: k ** -3.0 for k in range(1, 80)})
    rep = method_rate_report(f, "tap", power_majorant(1.0), [0.5, 0.8, 0.9], r=2)
    assert rep.parameter == "rho"
    assert len(rep.columns["error"]) == 3
    assert sp_norm(f, 1) > rep.columns["error"][-1]
