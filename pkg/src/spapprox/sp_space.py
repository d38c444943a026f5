"""Finitely supported coefficient elements and their l_p-type quantities.

An element is an immutable sparse map from indices to non-zero complex
coefficients.  Norms, tails outside an index set and multiplier transforms
reduce to finite sums, evaluated with compensated summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping

from .errors import DescriptorError, InvalidCoefficient, ZeroDivisor
from .psi_system import Index, IndexSet, PsiSystem

#: smallest coefficient magnitude accepted at construction
MIN_MAGNITUDE = 1e-300


def _as_complex(value: Any) -> complex:
    if isinstance(value, Fraction):
        return complex(float(value))
    return complex(value)


class SpElement:
    """Immutable finitely supported coefficient map ``index -> f_hat(index)``.

    Parameters
    ----------
    coeffs : mapping
        Index to coefficient.  Entries with magnitude below ``MIN_MAGNITUDE``
        (including exact zeros) are rejected.
    dimension : int or None
        ``None`` for indices over the naturals, ``d`` for lattice vectors.
    """

    __slots__ = ("_coeffs", "dimension", "_hash")

    def __init__(self, coeffs: Mapping[Index, Any] | None = None, dimension: int | None = None) -> None:
        clean: dict[Index, complex] = {}
        for index, raw in (coeffs or {}).items():
            index = _check_index(index, dimension)
            c = _as_complex(raw)
            if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                raise InvalidCoefficient(f"non-finite coefficient at {index!r}")
            if abs(c) < MIN_MAGNITUDE:
                raise InvalidCoefficient(f"coefficient at {index!r} below {MIN_MAGNITUDE:g}; "
                                         "omit zero coefficients instead")
            clean[index] = c
        object.__setattr__(self, "_coeffs", clean)
        object.__setattr__(self, "dimension", dimension)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name: str, value: Any) -> None:
        raise AttributeError("SpElement is immutable")

    @classmethod
    def _pruned(cls, coeffs: Mapping[Index, complex], dimension: int | None) -> "SpElement":
        # results of arithmetic may underflow; such entries are dropped
        return cls({k: c for k, c in coeffs.items() if abs(c) >= MIN_MAGNITUDE}, dimension)

    @property
    def coeffs(self) -> dict[Index, complex]:
        return dict(self._coeffs)

    @property
    def support(self) -> frozenset:
        return frozenset(self._coeffs)

    def __getitem__(self, index: Index) -> complex:
        return self._coeffs.get(index, 0j)

    def __len__(self) -> int:
        return len(self._coeffs)

    def items(self) -> list[tuple[Index, complex]]:
        """Coefficient pairs sorted by index."""
        return sorted(self._coeffs.items())

    def is_zero(self) -> bool:
        return not self._coeffs

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SpElement) and self.dimension == other.dimension \
            and self._coeffs == other._coeffs

    def __hash__(self) -> int:
        if self._hash is None:
            object.__setattr__(self, "_hash", hash((self.dimension, frozenset(self._coeffs.items()))))
        return self._hash

    def __repr__(self) -> str:
        return f"SpElement({dict(self.items())!r}, dimension={self.dimension})"

    def _combine(self, other: "SpElement", sign: int) -> "SpElement":
        if self.dimension != other.dimension:
            raise DescriptorError("elements live over different index sets")
        out = dict(self._coeffs)
        for k, c in other._coeffs.items():
            out[k] = out.get(k, 0j) + sign * c
        return SpElement._pruned(out, self.dimension)

    def __add__(self, other: "SpElement") -> "SpElement":
        return self._combine(other, 1)

    def __sub__(self, other: "SpElement") -> "SpElement":
        return self._combine(other, -1)

    def scale(self, factor: complex) -> "SpElement":
        return SpElement._pruned({k: factor * c for k, c in self._coeffs.items()}, self.dimension)

    def map_coefficients(self, multiplier: Callable[[Index], complex]) -> "SpElement":
        """Coefficientwise product with ``multiplier(index)``; zeros are dropped."""
        return SpElement._pruned({k: multiplier(k) * c for k, c in self._coeffs.items()}, self.dimension)

    def restrict(self, keep: Callable[[Index], bool]) -> "SpElement":
        return SpElement({k: c for k, c in self._coeffs.items() if keep(k)}, self.dimension)

    # -- plain text serialisation -----------------------------------------
    def to_text(self) -> str:
        """One line per coefficient: ``k1 ... kd re im``."""
        lines = []
        for k, c in self.items():
            ks = (k,) if isinstance(k, int) else k
            lines.append(" ".join([*(str(x) for x in ks), repr(c.real), repr(c.imag)]))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, dimension: int | None = None) -> "SpElement":
        coeffs: dict[Index, complex] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            width = 1 if dimension is None else dimension
            if len(parts) != width + 2:
                raise DescriptorError(f"line {lineno}: expected {width + 2} fields, got {len(parts)}")
            ks = [int(x) for x in parts[:width]]
            index: Index = ks[0] if dimension is None else tuple(ks)
            if index in coeffs:
                raise DescriptorError(f"line {lineno}: duplicate index {index!r}")
            coeffs[index] = complex(float(parts[-2]), float(parts[-1]))
        return cls(coeffs, dimension)


def _check_index(index: Any, dimension: int | None) -> Index:
    if dimension is None:
        if isinstance(index, bool) or not isinstance(index, int) or index < 1:
            raise DescriptorError(f"index {index!r} is not a positive integer")
        return index
    if not isinstance(index, tuple) or len(index) != dimension:
        raise DescriptorError(f"index {index!r} is not a lattice vector of dimension {dimension}")
    return tuple(int(x) for x in index)


def power_sum(values: Iterable[complex], p: float) -> float:
    """Compensated ``sum |v|**p``."""
    return math.fsum(abs(v) ** p for v in values)


def sp_norm(f: SpElement, p: float) -> float:
    """``(sum_k |f_hat(k)|**p)**(1/p)``."""
    if not p > 0:
        raise DescriptorError("exponent p must be positive")
    return power_sum(f._coeffs.values(), p) ** (1.0 / p)


def tail_power(f: SpElement, region: IndexSet | Iterable[Index] | None, p: float) -> float:
    """``sum_{k not in region} |f_hat(k)|**p``."""
    if region is None:
        return power_sum(f._coeffs.values(), p)
    if not isinstance(region, IndexSet):
        region = frozenset(region)
    return math.fsum(abs(c) ** p for k, c in f._coeffs.items() if k not in region)


def tail_error(f: SpElement, region: IndexSet | Iterable[Index] | None, p: float) -> float:
    """Best approximation of ``f`` by polynomials with spectrum in ``region``.

    By the minimal property of partial sums this is the l_p norm of the
    coefficients outside ``region``.
    """
    if not p > 0:
        raise DescriptorError("exponent p must be positive")
    return tail_power(f, region, p) ** (1.0 / p)


@dataclass(frozen=True)
class DerivativeResult:
    """ψ-derivative with the dropped part on the declared zero set."""

    derivative: SpElement
    free_term: SpElement


def psi_transform(f: SpElement, psi: PsiSystem, direction: str) -> SpElement:
    """ψ-integral (``integrate``) or ψ-derivative (``differentiate``) of ``f``.

    Differentiation drops coefficients on the declared zero set of ``psi``;
    use :func:`psi_derivative` to also receive the dropped part.

    Raises
    ------
    ZeroDivisor
        When differentiating at an undeclared zero of ``psi``.
    """
    if direction == "integrate":
        return f.map_coefficients(lambda k: _as_complex(psi.value(k)))
    if direction == "differentiate":
        return psi_derivative(f, psi).derivative
    raise DescriptorError("direction must be 'integrate' or 'differentiate'")


def psi_derivative(f: SpElement, psi: PsiSystem) -> DerivativeResult:
    kept: dict[Index, complex] = {}
    free: dict[Index, complex] = {}
    for k, c in f._coeffs.items():
        v = psi.value(k)
        if v == 0:
            if psi.is_declared_zero(k):
                free[k] = c
                continue
            raise ZeroDivisor(f"psi vanishes at {k!r}, which is not a declared zero")
        kept[k] = c / _as_complex(v)
    return DerivativeResult(SpElement._pruned(kept, f.dimension), SpElement(free, f.dimension))


def split_free_term(f: SpElement, psi: PsiSystem) -> tuple[SpElement, SpElement]:
    """Split ``f`` into its part off and on the declared zero set of ``psi``."""
    on = f.restrict(psi.is_declared_zero)
    return f - on, on
