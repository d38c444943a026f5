"""Acceptance criteria, one test each, with runtime budgets."""

from __future__ import annotations

import filecmp
import functools
import itertools
import math
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
import yaml

import acceptance_log
from helpers import brute_lattice_count
from spapprox.cli import run
from spapprox.errors import SupportViolation
from spapprox.extremal import ellipsoid_gamma_error, kolmogorov_width_table, nterm, nterm_unit
from spapprox.func_classes import (
    as_decay_function,
    classify,
    exact_class_values,
    order_formula,
    ratio_validation,
)
from spapprox.identities import direct_identity_residual, inverse_bound_check, inverse_identity_check
from spapprox.jackson import In_integral, closed_form_In, jackson_checks
from spapprox.linmethods import (
    generalized_derivative,
    method_multipliers,
    tap_multiplier,
    tap_multiplier_derivative_form,
)
from spapprox.oracles import diagonal_norm_oracle
from spapprox.psi_system import build_system, lattice_count
from spapprox.rules import make_rule
from spapprox.sp_space import SpElement

FIXTURES = Path(__file__).parent / "fixtures"


def criterion(num: int, title: str, budget: float | None):
    """Time the test, record a PASS/FAIL line and enforce the runtime budget."""

    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                detail = fn(*args, **kwargs) or ""
            except BaseException as exc:
                elapsed = time.perf_counter() - start
                acceptance_log.RESULTS.append((num, title, False, f"{type(exc).__name__} after {elapsed:.1f}s"))
                raise
            elapsed = time.perf_counter() - start
            ok = budget is None or elapsed <= budget
            limit = "" if budget is None else f" (budget {budget:g}s)"
            acceptance_log.RESULTS.append((num, title, ok, f"{detail}; {elapsed:.2f}s{limit}"))
            assert ok, f"runtime {elapsed:.1f}s exceeds {budget}s"

        return wrapper

    return deco


def table(mods):
    return build_system({"mode": "table", "table": [[k + 1, float(m)] for k, m in enumerate(mods)]})


# ---------------------------------------------------------------------------

@criterion(1, "closed-form I_n for integer lambda", 5)
def test_c01_In_closed_form():
    worst = 0.0
    for lam in (1, 2, 3):
        target = closed_form_In(lam)
        for n in range(1, 51):
            worst = max(worst, abs(In_integral(n, lam).value - target) / target)
    assert worst < 1e-9
    assert closed_form_In(1) == 2.0
    # the quadrature route itself reaches 2 up to a few units in the last place
    assert abs(In_integral(1, 1).value - 2.0) <= 4 * np.spacing(2.0)
    return f"max rel err {worst:.2e}"


@criterion(2, "unit-system n-term scan", 1)
def test_c02_unit_system():
    rng = np.random.default_rng(2)
    grid = [Fraction(1), Fraction(3, 2), Fraction(2), Fraction(5, 2), Fraction(3), Fraction(4), Fraction(1, 2)]
    checked = 0
    while checked < 200:
        n = int(rng.integers(1, 200))
        p, q = sorted((grid[rng.integers(len(grid))], grid[rng.integers(len(grid))]), reverse=True)
        res = nterm_unit(n, float(p), float(q))
        if p == q:
            assert res.value == 1
        else:
            floor_point = math.floor(n / (1 - q / p))
            assert res.witness in (floor_point, floor_point + 1), (n, p, q, res.witness)
        checked += 1
    return f"{checked} cases"


@criterion(3, "gamma-error closed form vs oracle", 60)
def test_c03_gamma_oracle():
    rng = np.random.default_rng(3)
    worst = 0.0
    for i in range(100):
        dim = int(rng.integers(2, 1001))
        mods = rng.uniform(0.01, 1.0, dim)
        if i % 2:
            mods = np.sort(mods)[::-1]
        p, q = (float(x) for x in rng.choice([1.0, 1.5, 2.0, 3.0], 2))
        n = int(rng.integers(0, min(dim - 1, 20) + 1))
        gamma = sorted(rng.choice(dim, n, replace=False).tolist())
        closed = ellipsoid_gamma_error(table(mods), [g + 1 for g in gamma], p, q).value
        oracle = diagonal_norm_oracle(mods, n, p, q, "gamma-error", gamma=gamma, restarts=8, seed=i)
        worst = max(worst, abs(closed - oracle) / closed)
    assert worst < 1e-6
    return f"100 systems, max rel diff {worst:.2e}"


@criterion(4, "n-term oracle sandwich", 120)
def test_c04_nterm_oracle():
    rng = np.random.default_rng(4)
    gap = 0.0
    for i in range(50):
        dim = int(rng.integers(2, 17))
        n = int(rng.integers(1, min(4, dim - 1) + 1))
        mods = rng.uniform(0.05, 1.0, dim)
        p, q = (float(x) for x in rng.choice([1.0, 1.5, 2.0, 3.0], 2))
        closed = nterm(table(mods), n, p, q).value
        oracle = diagonal_norm_oracle(mods, n, p, q, "nterm", restarts=32, seed=i)
        assert oracle <= closed * (1 + 1e-12) + 1e-15, (i, oracle, closed)
        assert closed <= oracle + 1e-6, (i, oracle, closed)
        gap = max(gap, closed - oracle)
    return f"50 systems, max gap {gap:.2e}"


def _random_element(rng, d):
    size = int(rng.integers(1, 15))
    coeffs = {}
    for _ in range(size):
        if d is None:
            k = int(rng.integers(1, 40))
        else:
            k = tuple(int(x) for x in rng.integers(-6, 7, d))
        coeffs[k] = complex(rng.normal(), rng.normal()) * 10.0 ** rng.uniform(-3, 1)
    return SpElement(coeffs, d)


@criterion(5, "direct and inverse identities", 10)
def test_c05_identities():
    rng = np.random.default_rng(5)
    systems = [
        (build_system({"mode": "sequence", "rule": {"family": "power", "r": 1.5}}), None),
        (build_system({"mode": "sequence", "rule": {"family": "geometric", "ratio": 0.8}}), None),
        (build_system({"mode": "product", "dimension": 2, "rule": {"family": "power", "r": 1}}), 2),
        (build_system({"mode": "radial", "dimension": 3, "r": 1, "rule": {"family": "exp", "lam": 0.5}}), 3),
    ]
    worst = 0.0
    for i in range(200):
        psi, d = systems[i % len(systems)]
        p = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        n = int(rng.integers(1, 12))
        f = _random_element(rng, d)
        worst = max(worst, direct_identity_residual(f, psi, p, n).relative_residual)
        g = _random_element(rng, d)
        worst = max(worst, inverse_identity_check(g, psi, p, n)[1].relative_residual)
    assert worst < 1e-10
    return f"400 residuals, max {worst:.2e}"


def _brute_table(value, indices, cutoff):
    """Levels with value above ``cutoff`` from sorted moduli, grouped like the package (rel 1e-12)."""
    vals = sorted((value(k) for k in indices), reverse=True)
    eps, delta = [], [0]
    for v in vals:
        if v <= cutoff:
            break
        if not eps or v < eps[-1] * (1 - 1e-12):
            eps.append(v)
            delta.append(delta[-1])
        delta[-1] += 1
    return eps, delta


@criterion(6, "Kolmogorov width step structure", 5)
def test_c06_width_structure():
    rng = np.random.default_rng(6)
    cases = []
    for _ in range(8):
        dim = int(rng.integers(3, 40))
        mods = rng.choice([1.0, 0.5, 0.25, 0.2, 0.1, 0.05], dim)
        cases.append((table(mods), lambda k, m=mods: float(m[k - 1]), range(1, dim + 1), 0.0))
    rules = [{"family": "power", "r": 1}, {"family": "power", "r": 2.5}, {"family": "geometric", "ratio": 0.7},
             {"family": "exp", "lam": 0.3, "s": 1.5}]
    for spec in rules:
        rule = make_rule(spec)
        cases.append((build_system({"mode": "sequence", "rule": spec}), lambda k, r=rule: float(r.value(float(k))),
                      range(1, 301), float(rule.value(301.0))))
    L = 30
    for r_exp in (1, 2, 3):
        spec = {"family": "power", "r": r_exp}
        cases.append((build_system({"mode": "product", "dimension": 2, "rule": spec}),
                      lambda k, e=r_exp: float(max(abs(k[0]), 1) * max(abs(k[1]), 1)) ** -e,
                      list(itertools.product(range(-L, L + 1), repeat=2)), float(L + 1) ** -r_exp))
    geo = make_rule({"family": "geometric", "ratio": 0.6})
    cases.append((build_system({"mode": "product", "dimension": 2, "rule": {"family": "geometric", "ratio": 0.6}}),
                  lambda k: float(geo.value(float(max(abs(k[0]), 1)))) * float(geo.value(float(max(abs(k[1]), 1)))),
                  list(itertools.product(range(-L, L + 1), repeat=2)), float(geo.value(L + 1.0)) * float(geo.value(1.0))))
    for d, r_norm, spec in [(2, 1, {"family": "power", "r": 2}), (2, 2, {"family": "power", "r": 1.5}),
                            (3, math.inf, {"family": "exp", "lam": 1}), (2, math.inf, {"family": "geometric", "ratio": 0.5})]:
        rule = make_rule(spec)
        R = 8 if d == 3 else 20
        norm = (lambda k, rn=r_norm: float(np.linalg.norm(np.array(k, float), ord=rn)))
        cases.append((build_system({"mode": "radial", "dimension": d, "r": r_norm, "rule": spec}),
                      lambda k, rl=rule, nm=norm: float(rl.value(max(nm(k), 1.0))),
                      list(itertools.product(range(-R, R + 1), repeat=d)), float(rule.value(R + 1.0))))
    assert len(cases) == 20
    for idx, (psi, value, indices, cutoff) in enumerate(cases):
        eps, delta = _brute_table(value, indices, cutoff)
        levels = min(len(eps), 25)
        rows = kolmogorov_width_table(psi, 2.0, levels)
        assert len(rows) == levels
        for n, row in enumerate(rows, start=1):
            assert (row.m_low, row.m_high) == (delta[n - 1], delta[n] - 1), (idx, n)
            assert row.value == pytest.approx(eps[n - 1], rel=1e-12)
    # hyperbolic cross: epsilon_n = n^-r exactly
    rows = kolmogorov_width_table(cases[13][0], 2.0, 30)
    assert all(row.value == pytest.approx(float(n) ** -2, rel=1e-15) for n, row in enumerate(rows, start=1))
    return "20 systems"


@criterion(7, "lattice counts", 10)
def test_c07_lattice_counts():
    for d in range(1, 5):
        for m in range(0, 21):
            assert lattice_count(d, math.inf, m) == (2 * m + 1) ** d
    spreads = []
    for d in (1, 2, 3):
        ratio = lattice_count(d, 1, 200) / 200 ** d
        target = 2 ** d / math.factorial(d)
        spreads.append(abs(ratio / target - 1))
        assert spreads[-1] < 0.05
    # small cases against enumeration
    for d, r, m in [(2, 1, 7), (3, 1, 5), (2, 2, 9)]:
        assert lattice_count(d, r, m) == brute_lattice_count(d, r, m)
    return f"r=1 deviations {', '.join(f'{s:.3%}' for s in spreads)}"


def _y_element(rng, d):
    coeffs = {}
    while not any(k if isinstance(k, int) else any(k) for k in coeffs):
        coeffs = {}
        for _ in range(int(rng.integers(1, 10))):
            sign = 1 if rng.random() < 0.5 else -1
            k = tuple(sign * int(x) for x in rng.integers(0, 9, d))
            coeffs[k] = complex(rng.normal(), rng.normal())
    return SpElement(coeffs, d)


@criterion(8, "Jackson inequalities fuzz", 60)
def test_c08_jackson_fuzz():
    rng = np.random.default_rng(8)
    failures = 0
    for _ in range(1000):
        d = int(rng.integers(1, 4))
        alpha = float(rng.choice([0.5, 1.0, 2.0]))
        p = float(rng.choice([1.0, 2.0]))
        n = int(rng.integers(1, 33))
        rep = jackson_checks(_y_element(rng, d), alpha, p, n)
        failures += not rep.all_hold
    assert failures == 0
    l = 4
    with pytest.raises(SupportViolation):
        jackson_checks(SpElement({(l, -l): 1.0}, 2), 1.0, 1.0, 2)
    return "1000 elements, 0 failures; (l,-l) rejected"


@criterion(9, "inverse theorem fuzz", 30)
def test_c09_inverse_fuzz():
    rng = np.random.default_rng(9)
    relaxed = 0
    for _ in range(1000):
        d = int(rng.integers(1, 4))
        alpha = float(rng.choice([0.5, 1.0, 1.5, 2.0]))
        p = float(rng.choice([1.0, 1.5, 2.0]))
        n = int(rng.integers(1, 17))
        coeffs = {tuple(int(x) for x in rng.integers(-8, 9, d)): complex(rng.normal(), rng.normal())
                  for _ in range(int(rng.integers(1, 10)))}
        rep = inverse_bound_check(SpElement(coeffs, d), alpha, p, n)
        assert rep.lhs <= rep.rhs_exact * (1 + 1e-12) + 1e-300
        if rep.relaxation_valid:
            relaxed += 1
            assert rep.rhs_exact <= rep.rhs_relaxed * (1 + 1e-12)
        assert rep.holds
    return f"1000 elements, relaxation checked on {relaxed} with alpha p >= 1"


POWER_FIXTURES = [
    (kind, d, r, p, q, s)
    for kind in ("e_n", "width")
    for d in (1, 2)
    for r in (1, math.inf)
    for p, q in ((1, 2), (2, 1), (1, 1), (2, 4))
    for s in (1.5, 2, 3, 4)
    if s > d * (1 / p - 1 / q)
]


@criterion(10, "order-estimate ratios", 120)
def test_c10_order_ratios():
    n_values = sorted({int(round(x)) for x in np.geomspace(4, 1e4, 25)})
    lo, hi = math.inf, 0.0
    for kind, d, r, p, q, s in POWER_FIXTURES:
        rule = {"family": "power", "r": s}
        label = classify(as_decay_function(rule).power(p))
        exact = exact_class_values(kind, p, q, rule, n_values, d=d, r=r)
        order = [order_formula(kind, p, q, rule, n, d=d, r=r, label=label).value for n in n_values]
        rep = ratio_validation(exact, order, n_values)
        assert rep.passes, (kind, d, r, p, q, s, rep.min_ratio, rep.max_ratio)
        lo, hi = min(lo, rep.min_ratio), max(hi, rep.max_ratio)
    # exponential decay in one dimension: n-term error, widths and psi(n/2) are comparable;
    # n stops at 600 because tails of e^{-k} in l_2 underflow double precision near 700
    exp_rule = {"family": "exp", "lam": 1}
    exp_values = sorted({int(round(x)) for x in np.geomspace(4, 600, 15)})
    for p, q in ((1, 1), (1, 2), (2, 1)):
        e_n = exact_class_values("e_n", p, q, exp_rule, exp_values, d=1, r=math.inf)
        w_n = exact_class_values("width", p, q, exp_rule, exp_values, d=1, r=math.inf)
        half = [math.exp(-n / 2) for n in exp_values]
        for a, b in ((e_n, w_n), (e_n, half), (w_n, half)):
            rep = ratio_validation(a, b, exp_values)
            assert rep.passes, (p, q, rep.min_ratio, rep.max_ratio)
            lo, hi = min(lo, rep.min_ratio), max(hi, rep.max_ratio)
    return f"{len(POWER_FIXTURES)} power fixtures + exp checks, ratios in [{lo:.3f}, {hi:.3f}]"


@criterion(11, "linear summation methods", 5)
def test_c11_linear_methods():
    worst = 0.0
    for rho in (0.0, 0.1, 0.5, 0.9, 0.99, 0.999):
        for r in range(1, 9):
            for nu in range(0, 201):
                a = tap_multiplier(nu, r, rho)
                b = tap_multiplier_derivative_form(nu, r, rho)
                worst = max(worst, abs(a - b))
    assert worst <= 1e-12
    for rho in (0.0, 0.3, 0.77, 0.95):
        tap = method_multipliers("tap", rho=rho, r=1)
        ap = method_multipliers("abel_poisson", rho=rho, s=1)
        assert all(abs(tap(nu) - ap(nu)) <= 1e-15 for nu in range(0, 201))
    rng = np.random.default_rng(11)
    for _ in range(200):
        d = int(rng.integers(1, 4))
        f = _random_element(rng, d)
        assert generalized_derivative(f, 1, "round") == generalized_derivative(f, 1, "bracket")
    return f"max form difference {worst:.2e}"


@criterion(12, "CLI determinism across job counts", None)
def test_c12_determinism(tmp_path):
    compared = 0
    for cfg in sorted(FIXTURES.glob("*.yaml")):
        cmd = yaml.safe_load(cfg.read_text())["command"]
        for jobs in (1, 8):
            code = run([*cmd, "--config", str(cfg), "--out", str(tmp_path / str(jobs) / cfg.stem),
                        "--jobs", str(jobs)])
            assert code == 0, (cfg.name, jobs)
        for out in (tmp_path / "1" / cfg.stem).glob("*.csv"):
            twin = tmp_path / "8" / cfg.stem / out.name
            assert filecmp.cmp(out, twin, shallow=False), cfg.name
            compared += 1
    return f"{compared} CSV files byte-identical"
