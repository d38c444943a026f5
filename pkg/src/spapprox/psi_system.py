"""Multiplier systems over the naturals or the integer lattice.

A system assigns a complex multiplier to every index and can enumerate its
indices by decreasing modulus, level by level.  From that enumeration come
the characteristic sequences (distinct moduli, their superlevel sets and
cardinalities), the decreasing rearrangement, and region helpers such as
hyperbolic crosses and lattice balls.

Indices over the naturals are plain ``int`` values ``k >= 1``; lattice
indices are ``tuple`` values of fixed length ``d``.
"""

from __future__ import annotations

import heapq
import itertools
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Iterator, Sequence, Union

import numpy as np
from scipy import special

from .errors import (
    BudgetExceeded,
    DescriptorError,
    DivergentTail,
    NonDecayingSystem,
    ZeroEntry,
)
from .rules import DecayRule, ExpRule, GeometricRule, PowerRule, check_non_increasing, make_rule

Index = Union[int, tuple[int, ...]]
Number = Union[int, float, complex, Fraction]

#: default enumeration budget
N_MAX = 1_000_000
#: relative tolerance used when grouping rule-generated moduli
GROUP_RTOL = 1e-12
#: default bound on bounding-box size for lattice counting
BOX_BUDGET = 2_000_000_000


def l1_norm(k: Sequence[int]) -> int:
    return sum(abs(x) for x in k)


def lattice_norm(k: Sequence[int], r: float) -> float:
    """``|k|_r`` for ``r`` in ``(0, inf]``."""
    if math.isinf(r):
        return float(max((abs(x) for x in k), default=0))
    if r == 1:
        return float(l1_norm(k))
    if r == 2:
        return math.sqrt(sum(x * x for x in k))
    return sum(abs(x) ** r for x in k) ** (1.0 / r)


def prime(x: int) -> int:
    """``k' = 1`` when ``k == 0`` and ``|k|`` otherwise."""
    return 1 if x == 0 else abs(x)


def sign_variants(a: Sequence[int]) -> list[tuple[int, ...]]:
    """All lattice points whose coordinatewise absolute value is ``a``."""
    choices = [(0,) if x == 0 else (-x, x) for x in a]
    return [tuple(c) for c in itertools.product(*choices)]


def l1_shell(d: int, nu: int) -> list[tuple[int, ...]]:
    """Points with ``|k|_1 == nu`` in lexicographic order."""
    if d == 1:
        return [(0,)] if nu == 0 else [(-nu,), (nu,)]
    out: list[tuple[int, ...]] = []
    for first in range(-nu, nu + 1):
        for rest in l1_shell(d - 1, nu - abs(first)):
            out.append((first, *rest))
    return out


def _modulus(value: Number) -> float | Fraction:
    if isinstance(value, Fraction):
        return abs(value)
    if isinstance(value, int):
        return Fraction(abs(value))
    return abs(value)


@dataclass(frozen=True)
class Level:
    """One level of the enumeration: a modulus and its indices (sorted)."""

    modulus: float | Fraction
    indices: tuple[Index, ...]


class PsiSystem:
    """Base class of multiplier systems.

    Subclasses provide :meth:`value`, :meth:`_generate_levels` and optionally
    a certified :meth:`power_tail`.  Levels are produced lazily and memoised;
    :meth:`levels` returns an independent cursor on every call.
    """

    mode: str = "abstract"
    #: ``None`` for systems over the naturals
    dimension: int | None = None
    n_max: int = N_MAX
    #: moduli are grouped by exact equality (tables) or relative tolerance
    exact_grouping: bool = False

    def __init__(self) -> None:
        self._memo: list[Level] = []
        self._memo_count = 0
        self._memo_done = False
        self._memo_gen: Iterator[Level] | None = None
        self._lock = threading.Lock()

    # -- evaluation -----------------------------------------------------
    def value(self, index: Index) -> Number:
        raise NotImplementedError

    def modulus(self, index: Index) -> float | Fraction:
        return _modulus(self.value(index))

    def is_declared_zero(self, index: Index) -> bool:
        """Whether ``index`` belongs to the declared zero set."""
        return False

    @property
    def is_finite(self) -> bool:
        return False

    def describe(self) -> dict[str, Any]:
        raise NotImplementedError

    def check_index(self, index: Index) -> Index:
        if self.dimension is None:
            if not isinstance(index, (int, np.integer)) or isinstance(index, bool) or index < 1:
                raise DescriptorError(f"index {index!r} is not a positive integer")
            return int(index)
        if not isinstance(index, tuple) or len(index) != self.dimension:
            raise DescriptorError(f"index {index!r} is not a lattice vector of dimension {self.dimension}")
        return tuple(int(x) for x in index)

    def same_level(self, lead: float | Fraction, other: float | Fraction) -> bool:
        """Whether ``other`` belongs to the level led by ``lead``."""
        if self.exact_grouping:
            return other == lead
        return other >= lead * (1 - GROUP_RTOL)

    # -- enumeration ----------------------------------------------------
    def _generate_levels(self) -> Iterator[Level]:
        raise NotImplementedError

    def _extend(self) -> bool:
        with self._lock:
            if self._memo_done:
                return False
            if self._memo_gen is None:
                self._memo_gen = self._generate_levels()
            try:
                lvl = next(self._memo_gen)
            except StopIteration:
                self._memo_done = True
                return False
            if self._memo_count + len(lvl.indices) > self.n_max:
                self._memo_done = True
                self._budget_hit = True
                return False
            self._memo.append(lvl)
            self._memo_count += len(lvl.indices)
            return True

    def levels(self) -> Iterator[Level]:
        """Yield levels by strictly decreasing modulus.

        Raises
        ------
        BudgetExceeded
            When the next level would push the enumerated count past ``n_max``.
        """
        i = 0
        while True:
            if i < len(self._memo):
                yield self._memo[i]
                i += 1
                continue
            if not self._extend():
                if getattr(self, "_budget_hit", False):
                    raise BudgetExceeded(
                        f"enumeration beyond {self.n_max} indices needed (level {i + 1})")
                return

    def prefix(self, count: int) -> tuple[list[Index], list[float | Fraction]]:
        """First ``count`` indices in enumeration order with their moduli.

        Finite systems may return fewer entries when exhausted.
        """
        if count > self.n_max:
            raise BudgetExceeded(f"{count} indices requested, budget is {self.n_max}")
        idx: list[Index] = []
        mods: list[float | Fraction] = []
        if count <= 0:
            return idx, mods
        for lvl in self.levels():
            take = lvl.indices[: count - len(idx)]
            idx.extend(take)
            mods.extend([lvl.modulus] * len(take))
            if len(idx) >= count:
                break
        return idx, mods

    # -- tails ----------------------------------------------------------
    def power_tail(self, count: int, a: float) -> float:
        """``sum_{k > count} rearranged_k ** a`` with a certified remainder.

        Raises
        ------
        DivergentTail
            If the sum diverges or no remainder bound is available.
        """
        if self.is_finite:
            _, mods = self.prefix(self.n_max)
            return math.fsum(float(m) ** a for m in mods[count:])
        raise DivergentTail(f"no certified tail bound for {self.mode} systems")


# ---------------------------------------------------------------------------
# explicit tables
# ---------------------------------------------------------------------------


class TableSystem(PsiSystem):
    """Finite explicit table; indices absent from the table carry zero."""

    mode = "table"
    exact_grouping = True

    def __init__(self, entries: Iterable[tuple[Index, Number]], dimension: int | None = None,
                 allow_zero: bool = False, n_max: int = N_MAX) -> None:
        super().__init__()
        self.dimension = dimension
        self.n_max = n_max
        table: dict[Index, Number] = {}
        zeros: set[Index] = set()
        for index, val in entries:
            index = self.check_index(index)
            if index in table or index in zeros:
                raise DescriptorError(f"duplicate table index {index!r}")
            if val == 0:
                if not allow_zero:
                    raise ZeroEntry(f"zero multiplier at {index!r}")
                zeros.add(index)
                continue
            table[index] = val
        if not table:
            raise DescriptorError("table system needs at least one non-zero entry")
        self.table = table
        self.zero_set = frozenset(zeros)

    def value(self, index: Index) -> Number:
        return self.table.get(index, 0)

    def is_declared_zero(self, index: Index) -> bool:
        return index in self.zero_set

    @property
    def is_finite(self) -> bool:
        return True

    def describe(self) -> dict[str, Any]:
        return {"mode": "table", "dimension": self.dimension, "size": len(self.table)}

    def _generate_levels(self) -> Iterator[Level]:
        items = sorted(((_modulus(v), k) for k, v in self.table.items()),
                       key=lambda t: (-t[0], t[1]))
        for mod, grp in itertools.groupby(items, key=lambda t: t[0]):
            yield Level(mod, tuple(k for _, k in grp))


# ---------------------------------------------------------------------------
# rule systems over the naturals
# ---------------------------------------------------------------------------


class SequenceSystem(PsiSystem):
    """``psi_k = rule(k)`` for ``k = 1, 2, ...`` with a non-increasing rule."""

    mode = "sequence"

    def __init__(self, rule: DecayRule, n_max: int = N_MAX) -> None:
        super().__init__()
        self.rule = rule
        self.n_max = n_max
        check_non_increasing(rule, upto=max(1e6, float(n_max)))

    def value(self, index: Index) -> float:
        return float(self.rule.value(float(self.check_index(index))))

    def describe(self) -> dict[str, Any]:
        return {"mode": "sequence", "rule": self.rule.describe()}

    def _generate_levels(self) -> Iterator[Level]:
        chunk = 1024
        k0 = 1
        lead: float | None = None
        members: list[int] = []
        while True:
            vals = np.asarray(self.rule.value(np.arange(k0, k0 + chunk, dtype=float)), dtype=float)
            for j, v in enumerate(vals.tolist()):
                if v <= 0.0:
                    if members:
                        yield Level(lead, tuple(members))
                    return
                if lead is not None and self.same_level(lead, v):
                    members.append(k0 + j)
                    continue
                if members:
                    yield Level(lead, tuple(members))
                lead, members = v, [k0 + j]
            k0 += chunk
            chunk = min(chunk * 2, 1 << 18)

    def power_tail(self, count: int, a: float) -> float:
        return self.rule.tail_sum(count + 1, a)


# ---------------------------------------------------------------------------
# lattice systems
# ---------------------------------------------------------------------------


class _FrontierSystem(PsiSystem):
    """Lattice systems whose modulus is non-increasing in each ``|k_j|``.

    Enumeration runs a best-first frontier over the non-negative orthant
    keyed by modulus (ties broken by the orthant vector), then expands each
    orthant vector into its sign variants.
    """

    def _orthant_value(self, a: tuple[int, ...]) -> float:
        raise NotImplementedError

    def value(self, index: Index) -> float:
        k = self.check_index(index)
        return self._orthant_value(tuple(abs(x) for x in k))

    def _generate_levels(self) -> Iterator[Level]:
        d = self.dimension
        start = (0,) * d
        heap = [(-self._orthant_value(start), start)]
        seen = {start}

        def push(a: tuple[int, ...]) -> None:
            for j in range(d):
                b = a[:j] + (a[j] + 1,) + a[j + 1:]
                if b not in seen:
                    seen.add(b)
                    heapq.heappush(heap, (-self._orthant_value(b), b))

        while heap:
            neg, a = heapq.heappop(heap)
            lead = -neg
            if lead <= 0.0:
                return
            group = [a]
            push(a)
            while heap and self.same_level(lead, -heap[0][0]):
                _, b = heapq.heappop(heap)
                group.append(b)
                push(b)
            indices = sorted(itertools.chain.from_iterable(sign_variants(b) for b in group))
            yield Level(lead, tuple(indices))


class ProductSystem(_FrontierSystem):
    """``psi(k) = prod_j rule_j(k'_j)`` with ``k' = max(|k|, 1)``."""

    mode = "product"

    def __init__(self, rules: Sequence[DecayRule], n_max: int = N_MAX) -> None:
        super().__init__()
        if not rules:
            raise DescriptorError("product system needs at least one coordinate rule")
        self.rules = tuple(rules)
        self.dimension = len(self.rules)
        self.n_max = n_max
        for rule in self.rules:
            check_non_increasing(rule)
        # a common power rule gives exact moduli (k'_1 ... k'_d)^(-r)
        first = self.rules[0]
        self._common_power = first.r if (
            isinstance(first, PowerRule) and all(rule == first for rule in self.rules)) else None

    def _orthant_value(self, a: tuple[int, ...]) -> float:
        if self._common_power is not None:
            return float(math.prod(max(x, 1) for x in a)) ** -self._common_power
        return math.prod(float(rule.value(float(max(x, 1)))) for rule, x in zip(self.rules, a))

    def describe(self) -> dict[str, Any]:
        return {"mode": "product", "dimension": self.dimension,
                "rules": [rule.describe() for rule in self.rules]}

    def power_tail(self, count: int, a: float) -> float:
        # total mass factorises over coordinates; the prefix is subtracted
        factors = []
        for rule in self.rules:
            head = 3.0 * float(rule.value(1.0)) ** a
            factors.append(head + 2.0 * rule.tail_sum(2, a))
        total = math.prod(factors)
        _, mods = self.prefix(count)
        return max(total - math.fsum(float(m) ** a for m in mods), 0.0)


def ball_count(d: int, r: float, m: int) -> int:
    """Closed-form ``V_m`` for ``r`` in ``{1, inf}``; used by tail sums."""
    if m < 0:
        return 0
    if math.isinf(r):
        return (2 * m + 1) ** d
    if r == 1:
        return sum(2 ** j * math.comb(d, j) * math.comb(m, j) for j in range(d + 1))
    raise ValueError("closed-form ball counts exist only for r in {1, inf}")


def _shell_polynomial(d: int, r: float) -> list[float]:
    """Coefficients ``c_j`` with ``V_m - V_{m-1} = sum_j c_j m**j`` for ``m >= 1``."""
    xs = [Fraction(m) for m in range(1, d + 1)]
    ys = [Fraction(ball_count(d, r, m) - ball_count(d, r, m - 1)) for m in range(1, d + 1)]
    coeffs = [Fraction(0)] * d
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        basis = [Fraction(1)]
        denom = Fraction(1)
        for j, xj in enumerate(xs):
            if j == i:
                continue
            basis = [Fraction(0)] + basis
            for t in range(len(basis) - 1):
                basis[t] -= xj * basis[t + 1]
            denom *= xi - xj
        for t in range(d):
            coeffs[t] += yi * basis[t] / denom
    return [float(c) for c in coeffs]


class RadialSystem(_FrontierSystem):
    """``psi(k) = rule(|k|_r)`` with ``psi(0) := rule(1)``."""

    mode = "radial"

    def __init__(self, rule: DecayRule, dimension: int, r: float, n_max: int = N_MAX) -> None:
        super().__init__()
        if dimension < 1:
            raise DescriptorError("dimension must be positive")
        if not (r > 0):
            raise DescriptorError("norm exponent r must be positive")
        self.rule = rule
        self.dimension = int(dimension)
        self.r = float(r)
        self.n_max = n_max
        check_non_increasing(rule)

    def _orthant_value(self, a: tuple[int, ...]) -> float:
        return float(self.rule.value(max(lattice_norm(a, self.r), 1.0)))

    def describe(self) -> dict[str, Any]:
        return {"mode": "radial", "dimension": self.dimension, "r": self.r,
                "rule": self.rule.describe()}

    def power_tail(self, count: int, a: float) -> float:
        if not (math.isinf(self.r) or self.r == 1):
            raise DivergentTail("certified radial tails need r in {1, inf}")
        d, r = self.dimension, self.r
        m0 = 1
        while ball_count(d, r, m0) <= count:
            m0 += 1
        # partial shell m0, then complete shells m > m0
        partial = (ball_count(d, r, m0) - count) * float(self.rule.value(float(m0))) ** a
        rule = self.rule
        if isinstance(rule, PowerRule):
            e = rule.r * a
            coeffs = _shell_polynomial(d, r)
            if e - (d - 1) <= 1:
                raise DivergentTail(f"radial tail diverges: exponent {e:g} with d={d}")
            rest = math.fsum(c * float(special.zeta(e - j, m0 + 1)) for j, c in enumerate(coeffs) if c)
            return partial + rest
        if isinstance(rule, GeometricRule) or (isinstance(rule, ExpRule) and rule.s >= 1):
            # terms t_m = S_m psi(m)^a have non-increasing ratios; close with a geometric bound
            terms = [partial]
            m = m0 + 1
            while m < 10_000_000:
                s_m = ball_count(d, r, m) - ball_count(d, r, m - 1)
                t_m = s_m * float(rule.value(float(m))) ** a
                s_n = ball_count(d, r, m + 1) - ball_count(d, r, m)
                t_n = s_n * float(rule.value(float(m + 1))) ** a
                terms.append(t_m)
                if t_m == 0.0:
                    return math.fsum(terms)
                ratio = t_n / t_m
                if ratio < 1 and t_n / (1 - ratio) <= 1e-13 * math.fsum(terms):
                    return math.fsum(terms) + t_n / (1 - ratio)
                m += 1
        raise DivergentTail(f"no certified radial tail bound for the {rule.family} rule")


class BlockSystem(PsiSystem):
    """Multipliers depending on ``nu = |k|_1`` only.

    ``kind='bracket'`` gives ``(nu - r)!/nu!`` for ``nu >= r`` and a declared
    zero below; ``kind='round'`` gives ``nu**(-r)`` with the ``nu = 0`` block
    declared zero when ``r > 0``.
    """

    mode = "block"

    def __init__(self, kind: str, order: int | float, dimension: int, n_max: int = N_MAX) -> None:
        super().__init__()
        if kind not in ("bracket", "round"):
            raise DescriptorError("block kind must be 'bracket' or 'round'")
        if dimension < 1:
            raise DescriptorError("dimension must be positive")
        if kind == "bracket" and (int(order) != order or order < 1):
            raise DescriptorError("bracket order must be a positive integer")
        if kind == "round" and order <= 0:
            raise NonDecayingSystem("round block rule with r <= 0 does not decay")
        self.kind = kind
        self.order = order
        self.dimension = int(dimension)
        self.n_max = n_max

    def block_value(self, nu: int) -> float:
        if self.kind == "bracket":
            r = int(self.order)
            if nu < r:
                return 0.0
            return math.exp(math.lgamma(nu - r + 1) - math.lgamma(nu + 1)) if nu > 20 \
                else math.factorial(nu - r) / math.factorial(nu)
        return 0.0 if nu == 0 else float(nu) ** -self.order

    def first_block(self) -> int:
        return int(self.order) if self.kind == "bracket" else 1

    def value(self, index: Index) -> float:
        return self.block_value(l1_norm(self.check_index(index)))

    def is_declared_zero(self, index: Index) -> bool:
        return l1_norm(index) < self.first_block()

    def describe(self) -> dict[str, Any]:
        return {"mode": "block", "kind": self.kind, "r": self.order, "dimension": self.dimension}

    def _generate_levels(self) -> Iterator[Level]:
        nu = self.first_block()
        while True:
            yield Level(self.block_value(nu), tuple(l1_shell(self.dimension, nu)))
            nu += 1


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def _parse_number(raw: Any) -> Number:
    if isinstance(raw, (list, tuple)) and len(raw) == 2:
        return complex(float(raw[0]), float(raw[1]))
    if isinstance(raw, str):
        text = raw.strip()
        try:
            return Fraction(text)
        except ValueError:
            return complex(text.replace("i", "j"))
    if isinstance(raw, (int, float, complex, Fraction)):
        return raw
    raise DescriptorError(f"cannot parse multiplier {raw!r}")


def _parse_index(raw: Any) -> Index:
    if isinstance(raw, (list, tuple)):
        return tuple(int(x) for x in raw)
    return int(raw)


def build_system(descriptor: dict[str, Any] | PsiSystem) -> PsiSystem:
    """Construct a system from a key-value descriptor.

    Parameters
    ----------
    descriptor : dict
        ``mode`` is one of ``table``, ``sequence``, ``product``, ``radial``,
        ``block``.  See the README for the full schema.

    Returns
    -------
    PsiSystem
        A system whose enumerated prefix has been checked for decay.

    Raises
    ------
    DescriptorError, NonDecayingSystem, ZeroEntry
    """
    if isinstance(descriptor, PsiSystem):
        return descriptor
    if not isinstance(descriptor, dict):
        raise DescriptorError("system descriptor must be a mapping")
    mode = descriptor.get("mode")
    n_max = int(descriptor.get("n_max", N_MAX))
    dim = descriptor.get("dimension")
    if dim is not None:
        dim = int(dim)
        if dim < 1:
            raise DescriptorError("dimension must be a positive integer")
    if mode == "table":
        rows = descriptor.get("table")
        if not rows:
            raise DescriptorError("table mode needs a non-empty 'table'")
        entries = [(_parse_index(k), _parse_number(v)) for k, v in rows]
        if dim is None and isinstance(entries[0][0], tuple):
            dim = len(entries[0][0])
        system: PsiSystem = TableSystem(entries, dimension=dim,
                                        allow_zero=bool(descriptor.get("allow_zero", False)),
                                        n_max=n_max)
    elif mode == "sequence":
        system = SequenceSystem(make_rule(descriptor.get("rule")), n_max=n_max)
    elif mode == "product":
        rules = descriptor.get("rules")
        if rules is None:
            if dim is None:
                raise DescriptorError("product mode needs 'rules' or 'dimension' with 'rule'")
            rules = [descriptor.get("rule")] * dim
        if dim is not None and len(rules) != dim:
            raise DescriptorError("number of product rules must equal the dimension")
        system = ProductSystem([make_rule(r) for r in rules], n_max=n_max)
    elif mode == "radial":
        if dim is None:
            raise DescriptorError("radial mode needs 'dimension'")
        r = descriptor.get("r", math.inf)
        r = math.inf if str(r).lower() in ("inf", "infinity") else float(r)
        system = RadialSystem(make_rule(descriptor.get("rule")), dim, r, n_max=n_max)
    elif mode == "block":
        if dim is None:
            raise DescriptorError("block mode needs 'dimension'")
        block = descriptor.get("block") or {}
        system = BlockSystem(block.get("kind", "round"), block.get("r", 1), dim, n_max=n_max)
    else:
        raise DescriptorError(f"unknown system mode {mode!r}")
    _check_decay(system)
    return system


def _check_decay(system: PsiSystem, probe: int = 64) -> None:
    """Reject systems whose moduli do not fall on the enumerated prefix."""
    if system.is_finite:
        return
    levels = []
    try:
        for lvl in system.levels():
            levels.append(lvl)
            if len(levels) >= probe:
                break
    except BudgetExceeded:
        pass
    if len(levels) < 2:
        raise NonDecayingSystem(f"{system.mode} system has fewer than two distinct moduli "
                                f"within budget {system.n_max}")


# ---------------------------------------------------------------------------
# characteristic sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CharSequences:
    """Distinct moduli ``epsilon``, counts ``delta`` and the rearrangement.

    ``epsilon[n-1]`` is the n-th distinct modulus, ``delta[n]`` the size of
    the n-th superlevel set (``delta[0] == 0``), and ``indices`` lists the
    enumerated indices so that ``g(n) == set(indices[:delta[n]])``.
    """

    epsilon: tuple[float | Fraction, ...]
    delta: tuple[int, ...]
    indices: tuple[Index, ...]
    complete: bool = True

    @property
    def levels(self) -> int:
        return len(self.epsilon)

    def g(self, n: int) -> frozenset[Index]:
        return frozenset(self.indices[: self.delta[n]])

    def rearranged(self) -> list[float | Fraction]:
        out: list[float | Fraction] = []
        for n, eps in enumerate(self.epsilon, start=1):
            out.extend([eps] * (self.delta[n] - self.delta[n - 1]))
        return out


def char_sequences(psi: PsiSystem, n_levels: int) -> CharSequences:
    """Resolve the first ``n_levels`` characteristic levels.

    Finite systems with fewer levels return all of them with
    ``complete=False``.

    Raises
    ------
    BudgetExceeded
        When resolving the requested levels needs more than ``n_max`` indices.
    """
    eps: list[float | Fraction] = []
    delta = [0]
    indices: list[Index] = []
    for lvl in psi.levels():
        if len(eps) >= n_levels:
            break
        eps.append(lvl.modulus)
        indices.extend(lvl.indices)
        delta.append(len(indices))
    return CharSequences(tuple(eps), tuple(delta), tuple(indices), complete=len(eps) >= n_levels)


def rearrangement(psi: PsiSystem, count: int) -> list[float | Fraction]:
    """First ``count`` terms of the decreasing rearrangement of ``|psi|``.

    Finite systems are padded with zeros past their support.
    """
    _, mods = psi.prefix(count)
    return mods + [0.0] * (count - len(mods))


# ---------------------------------------------------------------------------
# lattice counting and regions
# ---------------------------------------------------------------------------


def lattice_count(d: int, r: float, m: int, budget: int = BOX_BUDGET) -> int:
    """Number of ``k`` in ``Z^d`` with ``|k|_r <= m``, by box enumeration.

    The box ``[-m, m]^d`` is scanned coordinate by coordinate; the last
    coordinate is counted with a sorted search.

    Raises
    ------
    BudgetExceeded
        When ``(2m + 1)**d`` exceeds ``budget``.
    """
    if d < 1 or m < 0:
        raise DescriptorError("lattice_count needs d >= 1 and m >= 0")
    if not r > 0:
        raise DescriptorError("norm exponent r must be positive")
    if (2 * m + 1) ** d > budget:
        raise BudgetExceeded(f"bounding box (2m+1)^d = {(2 * m + 1) ** d} exceeds {budget}")
    coords = np.arange(-m, m + 1)
    if math.isinf(r):
        weights = np.abs(coords)
        limit: float = m
        combine = np.maximum
    else:
        combine = np.add
        if float(r).is_integer() and d * float(m) ** r < 2.0 ** 62:
            weights = np.abs(coords).astype(np.int64) ** int(r)
            limit = int(m) ** int(r)
        else:
            weights = np.abs(coords).astype(float) ** r
            limit = float(m) ** r * (1 + 1e-12)
    ordered = np.sort(weights)

    def count(dims: int, used: Any) -> int:
        if dims == 1:
            return int(np.searchsorted(ordered, limit - used if combine is np.add else limit,
                                       side="right")) if (combine is np.add or used <= limit) else 0
        if dims == 2:
            inner = combine(used, weights)
            if combine is np.add:
                return int(np.searchsorted(ordered, limit - inner, side="right").sum())
            return int(np.where(inner <= limit, len(ordered), 0).sum())
        return sum(count(dims - 1, combine(used, w)) for w in weights.tolist())

    return count(d, 0)


class IndexSet:
    """Finite or predicate-defined set of indices."""

    def __contains__(self, index: Index) -> bool:
        raise NotImplementedError

    def cardinality(self) -> int:
        raise NotImplementedError

    def members(self) -> list[Index]:
        raise NotImplementedError


@dataclass(frozen=True)
class ExplicitSet(IndexSet):
    items: frozenset

    def __contains__(self, index: Index) -> bool:
        return index in self.items

    def cardinality(self) -> int:
        return len(self.items)

    def members(self) -> list[Index]:
        return sorted(self.items)


@dataclass(frozen=True)
class TriangularRegion(IndexSet):
    """``|k|_1 <= m`` in dimension ``d``."""

    d: int
    m: int

    def __contains__(self, index: Index) -> bool:
        k = (index,) if isinstance(index, int) else index
        return l1_norm(k) <= self.m

    def cardinality(self) -> int:
        return lattice_count(self.d, 1, self.m) if self.m >= 0 else 0

    def members(self) -> list[Index]:
        return sorted(itertools.chain.from_iterable(l1_shell(self.d, nu) for nu in range(self.m + 1)))


@dataclass(frozen=True)
class BallRegion(IndexSet):
    """``|k|_r <= m`` in dimension ``d``."""

    d: int
    r: float
    m: int

    def __contains__(self, index: Index) -> bool:
        return lattice_norm(index, self.r) <= self.m * (1 + 1e-12)

    def cardinality(self) -> int:
        return lattice_count(self.d, self.r, self.m)

    def members(self) -> list[Index]:
        rng = range(-self.m, self.m + 1)
        return [k for k in itertools.product(rng, repeat=self.d) if k in self]


def _cross_count(d: int, n: int) -> int:
    if d == 0:
        return 1 if n >= 1 else 0
    return sum((3 if v == 1 else 2) * _cross_count(d - 1, n // v) for v in range(1, n + 1))


@dataclass(frozen=True)
class CrossRegion(IndexSet):
    """Hyperbolic cross ``k'_1 ... k'_d <= n``."""

    d: int
    n: int

    def __contains__(self, index: Index) -> bool:
        return math.prod(prime(x) for x in index) <= self.n

    def cardinality(self) -> int:
        return _cross_count(self.d, self.n)

    def members(self) -> list[Index]:
        def rec(dims: int, budget: int) -> list[tuple[int, ...]]:
            if dims == 0:
                return [()]
            out = []
            for v in range(1, budget + 1):
                vals = (-1, 0, 1) if v == 1 else (-v, v)
                for tail in rec(dims - 1, budget // v):
                    out.extend((x, *tail) for x in vals)
            return out

        return sorted(rec(self.d, self.n))


@dataclass(frozen=True)
class SuperlevelRegion(IndexSet):
    """``g_n(psi) = {k : |psi_k| >= epsilon_n}`` as a membership predicate."""

    psi: PsiSystem = field(compare=False)
    n: int
    threshold: float | Fraction
    size: int

    def __contains__(self, index: Index) -> bool:
        if self.n == 0:
            return False
        mod = self.psi.modulus(index)
        return mod != 0 and self.psi.same_level(self.threshold, mod)

    def cardinality(self) -> int:
        return self.size

    def members(self) -> list[Index]:
        idx, _ = self.psi.prefix(self.size)
        return sorted(idx)


def superlevel_region(psi: PsiSystem, n: int) -> SuperlevelRegion:
    """``g_n(psi)``; ``n == 0`` gives the empty set."""
    if n == 0:
        return SuperlevelRegion(psi, 0, math.inf, 0)
    seq = char_sequences(psi, n)
    if seq.levels < n:
        # finite system exhausted: g_n is the whole support
        return SuperlevelRegion(psi, n, seq.epsilon[-1], seq.delta[-1])
    return SuperlevelRegion(psi, n, seq.epsilon[n - 1], seq.delta[n])


def region(kind: str, **params: Any) -> IndexSet:
    """Build a region by kind.

    Kinds: ``triangular`` (``d``, ``m``), ``ball`` (``d``, ``r``, ``m``),
    ``cross`` (``d``, ``n``), ``gn`` (``psi``, ``n``), ``explicit`` (``items``).
    """
    for key in ("m", "n"):
        if key in params and int(params[key]) < 0:
            raise DescriptorError(f"region parameter {key} must be non-negative")
    if kind == "triangular":
        return TriangularRegion(int(params["d"]), int(params["m"]))
    if kind == "ball":
        r = params["r"]
        r = math.inf if str(r).lower() in ("inf", "infinity") else float(r)
        return BallRegion(int(params["d"]), r, int(params["m"]))
    if kind == "cross":
        return CrossRegion(int(params["d"]), int(params["n"]))
    if kind in ("gn", "gn-of-psi"):
        return superlevel_region(params["psi"], int(params["n"]))
    if kind == "explicit":
        return ExplicitSet(frozenset(params["items"]))
    raise DescriptorError(f"unknown region kind {kind!r}")


def locate_levels(psi: PsiSystem, support: Iterable[Index]) -> tuple[dict[Index, int], list]:
    """Map each index of ``support`` to its level number.

    Returns the mapping and the list of level moduli up to the deepest level
    touched.  Indices with zero modulus are mapped to ``0``.
    """
    pending = {}
    for k in support:
        mod = psi.modulus(k)
        pending[k] = mod
    result: dict[Index, int] = {k: 0 for k, m in pending.items() if m == 0}
    waiting = {k: m for k, m in pending.items() if m != 0}
    eps: list[float | Fraction] = []
    if not waiting:
        return result, eps
    for n, lvl in enumerate(psi.levels(), start=1):
        eps.append(lvl.modulus)
        for k in [k for k, m in waiting.items() if psi.same_level(lvl.modulus, m)]:
            result[k] = n
            del waiting[k]
        if not waiting:
            return result, eps
    raise BudgetExceeded("support indices not reached by the enumeration")
