import math
from fractions import Fraction

import pytest

from spapprox.errors import BudgetExceeded, DescriptorError, NonDecayingSystem
from spapprox.psi_system import (
    ball_count,
    build_system,
    char_sequences,
    l1_shell,
    lattice_count,
    rearrangement,
    region,
)

from helpers import brute_lattice_count, brute_levels, hyperbolic_moduli


def test_harmonic_sequence_levels():
    # [TRIVIAL] psi_k = 1/k: each level holds one index
    psi = build_system({"mode": "sequence", "rule": {"family": "power", "r": 1}})
    cs = char_sequences(psi, 6)
    assert [float(e) for e in cs.epsilon] == pytest.approx([1 / n for n in range(1, 7)], rel=1e-15)
    assert list(cs.delta) == list(range(7))
    assert cs.complete


def test_table_grouping_is_exact_for_fractions():
    psi = build_system({"mode": "table", "table": [[1, "1/2"], [2, "1/3"], [3, "1/2"], [4, "1/4"]]})
    cs = char_sequences(psi, 10)
    assert cs.epsilon == (Fraction(1, 2), Fraction(1, 3), Fraction(1, 4))
    assert cs.delta == (0, 2, 3, 4)
    assert not cs.complete
    assert cs.g(1) == frozenset({1, 3})


def test_rearrangement_pads_finite_tables():
    psi = build_system({"mode": "table", "table": [[1, 0.5], [2, 1.0]]})
    assert rearrangement(psi, 4) == [1.0, 0.5, 0.0, 0.0]


@pytest.mark.parametrize("r", [1, 2])
def test_hyperbolic_cross_levels_match_bruteforce(r):
    # [DERIVED] distinct moduli of (k'_1 k'_2)^{-r} sorted over a box that
    # contains every index with k'_1 k'_2 <= 12
    psi = build_system({"mode": "product", "dimension": 2, "rule": {"family": "power", "r": r}})
    cs = char_sequences(psi, 12)
    eps, delta = brute_levels(hyperbolic_moduli(r, 12))
    assert [float(e) for e in cs.epsilon] == pytest.approx([float(e) for e in eps[:12]], rel=1e-14)
    assert list(cs.delta) == delta[:13]
    assert [float(e) for e in cs.epsilon] == pytest.approx([n ** -r for n in range(1, 13)], rel=1e-14)


@pytest.mark.parametrize("d,r,m", [(1, 1, 5), (2, 1, 4), (2, 2, 5), (3, math.inf, 3), (2, 1.5, 6), (3, 1, 4)])
def test_lattice_count_matches_enumeration(d, r, m):
    assert lattice_count(d, r, m) == brute_lattice_count(d, r, m)


def test_ball_count_closed_forms():
    assert ball_count(3, math.inf, 4) == 9 ** 3
    assert ball_count(2, 1, 3) == brute_lattice_count(2, 1, 3)


def test_l1_shell_sizes():
    # shell |k|_1 = nu in Z^2 has 4 nu points for nu >= 1
    assert len(l1_shell(2, 0)) == 1
    assert all(len(l1_shell(2, nu)) == 4 * nu for nu in range(1, 8))


def test_regions():
    tri = region("triangular", d=2, m=2)
    assert tri.cardinality() == 13 == len(tri.members())
    ball = region("ball", d=2, r=math.inf, m=1)
    assert ball.cardinality() == 9
    assert (1, 1) in ball and (2, 0) not in ball
    with pytest.raises(DescriptorError):
        region("triangular", d=2, m=-1)
    with pytest.raises(DescriptorError):
        region("nope")


def test_block_and_radial_systems():
    psi = build_system({"mode": "block", "dimension": 2, "block": {"kind": "round", "r": 1}})
    assert psi.is_declared_zero((0, 0))
    assert psi.value((1, 2)) == pytest.approx(1 / 3)
    rad = build_system({"mode": "radial", "dimension": 2, "r": "inf", "rule": {"family": "power", "r": 2}})
    cs = char_sequences(rad, 3)
    # shells of the sup-norm ball: 1 point at radius 0 counted with 8 at radius 1 (k' = max(|k|,1))
    assert cs.delta[-1] == brute_lattice_count(2, math.inf, 3)


def test_bad_descriptors():
    with pytest.raises(DescriptorError):
        build_system({"mode": "mystery"})
    with pytest.raises(DescriptorError):
        build_system({"mode": "radial", "rule": {"family": "power", "r": 1}})
    with pytest.raises(NonDecayingSystem):
        build_system({"mode": "block", "dimension": 2, "block": {"kind": "round", "r": 0}})


def test_budget():
    psi = build_system({"mode": "sequence", "rule": {"family": "power", "r": 1}, "n_max": 10})
    with pytest.raises(BudgetExceeded):
        char_sequences(psi, 20)
