"""Pseudo-Boolean functions as exact multilinear polynomials.

Points of the cube are passed around either as 0/1 sequences (``x[0]`` is
the value of ``x1``) or, internally, as integer masks where bit ``i - 1``
holds ``x_i``.  Variable indices are 1-based everywhere a user can see them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Callable, Iterable, Mapping, Sequence, Union

from .errors import InputError, check_cap

Number = Union[int, Fraction]
TermKey = tuple  # strictly increasing tuple of 1-based variable indices

ENUMERATION_CAP = 20
TABLE_CAP = 24


# Fractions are immutable, so small integers can share one instance
_SMALL_INTS = {i: Fraction(i) for i in range(-1024, 1025)}


def as_fraction(value) -> Fraction:
    """Convert ``value`` to a Fraction, refusing floats (they are inexact)."""
    kind = type(value)
    if kind is Fraction:
        return value
    if kind is int:
        cached = _SMALL_INTS.get(value)
        return cached if cached is not None else Fraction(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        return Fraction(int(value))
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a rational number: {value!r}") from exc
    if hasattr(value, "numerator") and hasattr(value, "denominator"):
        # numpy integers and other numbers.Rational implementations
        return Fraction(int(value.numerator), int(value.denominator))
    raise InputError(f"expected an exact rational, got {type(value).__name__}")


def key_to_mask(key: Iterable[int]) -> int:
    mask = 0
    for i in key:
        if isinstance(i, bool) or not isinstance(i, int) or i < 1:
            raise InputError(f"variable indices are positive integers, got {i!r}")
        mask |= 1 << (i - 1)
    return mask


def mask_to_key(mask: int) -> TermKey:
    key = []
    i = 1
    while mask:
        if mask & 1:
            key.append(i)
        mask >>= 1
        i += 1
    return tuple(key)


def point_to_mask(x: Sequence[int], arity: int) -> int:
    if len(x) != arity:
        raise InputError(f"point has {len(x)} coordinates, expected {arity}")
    mask = 0
    for i, bit in enumerate(x):
        if bit == 1:
            mask |= 1 << i
        elif bit != 0:
            raise InputError(f"point coordinates must be 0 or 1, got {bit!r}")
    return mask


def mask_to_point(mask: int, arity: int) -> tuple:
    return tuple((mask >> i) & 1 for i in range(arity))


def all_points(arity: int):
    """Yield every point of {0,1}^arity in mask order."""
    for mask in range(1 << arity):
        yield mask_to_point(mask, arity)


def _term_order(mask: int):
    return (mask.bit_count(), mask_to_key(mask))


class MultilinearPoly:
    """Immutable multilinear polynomial with rational coefficients.

    ``terms`` maps index tuples to coefficients; the empty tuple is the
    constant.  Since ``x_i**2 == x_i`` on the cube, repeated indices in a
    key collapse.  Zero coefficients are dropped so equality of two
    polynomials is equality of functions on {0,1}^n.
    """

    __slots__ = ("arity", "_terms")

    def __init__(self, arity: int, terms: Mapping[Iterable[int], Number] | None = None):
        if isinstance(arity, bool) or not isinstance(arity, int) or arity < 0:
            raise InputError(f"arity must be a nonnegative integer, got {arity!r}")
        acc: dict[int, Fraction] = {}
        for key, coeff in (terms or {}).items():
            mask = key_to_mask(key)
            if mask >> arity:
                raise InputError(f"term {tuple(key)} uses a variable beyond arity {arity}")
            acc[mask] = acc.get(mask, Fraction(0)) + as_fraction(coeff)
        self.arity = arity
        self._terms = {m: c for m, c in sorted(acc.items(), key=lambda t: _term_order(t[0])) if c != 0}

    @classmethod
    def _from_masks(cls, arity: int, acc: Mapping[int, Fraction]) -> "MultilinearPoly":
        poly = cls.__new__(cls)
        poly.arity = arity
        poly._terms = {m: c for m, c in sorted(acc.items(), key=lambda t: _term_order(t[0])) if c != 0}
        return poly

    @classmethod
    def constant(cls, arity: int, value: Number) -> "MultilinearPoly":
        return cls(arity, {(): value})

    @classmethod
    def variable(cls, arity: int, i: int) -> "MultilinearPoly":
        if not 1 <= i <= arity:
            raise InputError(f"variable x{i} outside arity {arity}")
        return cls(arity, {(i,): 1})

    @property
    def terms(self) -> tuple:
        """``(key, coefficient)`` pairs in canonical (degree, lexicographic) order."""
        return tuple((mask_to_key(m), c) for m, c in self._terms.items())

    def mask_terms(self):
        return self._terms.items()

    def coefficient(self, key: Iterable[int] = ()) -> Fraction:
        return self._terms.get(key_to_mask(key), Fraction(0))

    def __len__(self):
        return len(self._terms)

    def __eq__(self, other):
        if not isinstance(other, MultilinearPoly):
            return NotImplemented
        return self.arity == other.arity and self._terms == other._terms

    def __hash__(self):
        return hash((self.arity, tuple(self._terms.items())))

    def __repr__(self):
        return f"MultilinearPoly({self.arity}, {dict(self.terms)!r})"

    def __str__(self):
        return format_poly_expr(self)

    def _check_same_arity(self, other):
        if self.arity != other.arity:
            raise InputError(f"arity mismatch: {self.arity} vs {other.arity}")

    def __add__(self, other):
        if not isinstance(other, MultilinearPoly):
            other = MultilinearPoly.constant(self.arity, other)
        self._check_same_arity(other)
        acc = dict(self._terms)
        for m, c in other._terms.items():
            acc[m] = acc.get(m, Fraction(0)) + c
        return MultilinearPoly._from_masks(self.arity, acc)

    __radd__ = __add__

    def __neg__(self):
        return MultilinearPoly._from_masks(self.arity, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        if not isinstance(other, MultilinearPoly):
            other = MultilinearPoly.constant(self.arity, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, MultilinearPoly):
            factor = as_fraction(other)
            return MultilinearPoly._from_masks(self.arity, {m: c * factor for m, c in self._terms.items()})
        self._check_same_arity(other)
        acc: dict[int, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = m1 | m2
                acc[m] = acc.get(m, Fraction(0)) + c1 * c2
        return MultilinearPoly._from_masks(self.arity, acc)

    __rmul__ = __mul__

    def __call__(self, x: Sequence[int]) -> Fraction:
        return evaluate(self, x)

    def evaluate_mask(self, point: int) -> Fraction:
        total = Fraction(0)
        for m, c in self._terms.items():
            if m & point == m:
                total += c
        return total

    def degree(self) -> int:
        return max((m.bit_count() for m in self._terms), default=0)

    def is_affine(self) -> bool:
        return all(m.bit_count() <= 1 for m in self._terms)

    def constant_term(self) -> Fraction:
        return self._terms.get(0, Fraction(0))

    def linear_coefficients(self) -> tuple:
        return tuple(self._terms.get(1 << i, Fraction(0)) for i in range(self.arity))


def evaluate(poly: MultilinearPoly, x: Sequence[int]) -> Fraction:
    """Value of ``poly`` at the 0/1 point ``x``."""
    return poly.evaluate_mask(point_to_mask(x, poly.arity))


def _value_table(arity: int, values) -> list:
    if isinstance(values, MultilinearPoly):
        if values.arity != arity:
            raise InputError(f"arity mismatch: {values.arity} vs {arity}")
        return [values.evaluate_mask(m) for m in range(1 << arity)]
    if callable(values):
        return [as_fraction(values(mask_to_point(m, arity))) for m in range(1 << arity)]
    table = [as_fraction(v) for v in values]
    if len(table) != 1 << arity:
        raise InputError(f"truth table has {len(table)} entries, expected {1 << arity}")
    return table


def value_table(arity: int, values, cap: int = ENUMERATION_CAP) -> list:
    """All function values in mask order.

    ``values`` may be a callable on 0/1 tuples, a MultilinearPoly, or a
    sequence of ``2**arity`` numbers indexed by mask.
    """
    check_cap("arity", arity, cap)
    return _value_table(arity, values)


def interpolate(arity: int, values, cap: int = ENUMERATION_CAP) -> MultilinearPoly:
    """The unique multilinear polynomial agreeing with ``values`` on {0,1}^arity.

    Uses the Moebius transform over the subset lattice, i.e. the
    coefficient of ``x_S`` is the alternating sum of values at subsets of S.
    Exact: the table is scaled to integers by the common denominator first.
    """
    table = value_table(arity, values, cap)
    den = lcm(*(v.denominator for v in table)) if table else 1
    work = [v.numerator * (den // v.denominator) for v in table]
    size = len(work)
    bit = 1
    while bit < size:
        for m in range(size):
            if m & bit:
                work[m] -= work[m ^ bit]
        bit <<= 1
    return MultilinearPoly._from_masks(arity, {m: Fraction(c, den) for m, c in enumerate(work) if c})


def nonlinear_part(poly: MultilinearPoly) -> MultilinearPoly:
    """``f - f(0) - sum_i (f(e_i) - f(0)) x_i``.

    For a multilinear polynomial ``f(0)`` is the constant term and
    ``f(e_i) - f(0)`` the coefficient of ``x_i``, so this keeps exactly the
    terms of degree two or more.
    """
    return MultilinearPoly._from_masks(
        poly.arity, {m: c for m, c in poly.mask_terms() if m.bit_count() >= 2}
    )


def nonlinear_values(arity: int, values, cap: int = ENUMERATION_CAP) -> list:
    """Values of the nonlinear part, straight from the defining formula."""
    table = value_table(arity, values, cap)
    f0 = table[0]
    slopes = [table[1 << i] - f0 for i in range(arity)]
    out = []
    for m, v in enumerate(table):
        lin = sum((slopes[i] for i in range(arity) if m >> i & 1), Fraction(0))
        out.append(v - f0 - lin)
    return out


def is_affine(poly: MultilinearPoly) -> bool:
    return poly.is_affine()


def degree(poly: MultilinearPoly) -> int:
    return poly.degree()


def monomial_count_deg2plus(poly: MultilinearPoly) -> int:
    """Number of monomials of degree >= 2, which is the monomial linearization complexity."""
    return sum(1 for m, _ in poly.mask_terms() if m.bit_count() >= 2)


# -- signed products and Boolean functions -----------------------------------


@dataclass(frozen=True)
class SignedProduct:
    """``prod_{i in positive} x_i * prod_{j in complemented} (1 - x_j)``."""

    positive: tuple = ()
    complemented: tuple = ()

    def __post_init__(self):
        pos = tuple(sorted(set(self.positive)))
        neg = tuple(sorted(set(self.complemented)))
        for i in pos + neg:
            if isinstance(i, bool) or not isinstance(i, int) or i < 1:
                raise InputError(f"variable indices are positive integers, got {i!r}")
        if set(pos) & set(neg):
            raise InputError(f"index sets overlap: I={pos} J={neg}")
        object.__setattr__(self, "positive", pos)
        object.__setattr__(self, "complemented", neg)

    @property
    def degree(self) -> int:
        return len(self.positive) + len(self.complemented)

    @property
    def max_index(self) -> int:
        return max(self.positive + self.complemented, default=0)

    def sort_key(self):
        return (self.degree, self.positive, self.complemented)

    def masks(self):
        return key_to_mask(self.positive), key_to_mask(self.complemented)

    def holds_at_mask(self, point: int) -> bool:
        pos, neg = self.masks()
        return point & pos == pos and not point & neg

    def __call__(self, x: Sequence[int]) -> int:
        return eval_signed_product(self, x)

    def to_poly(self, arity: int) -> MultilinearPoly:
        """Expand the complemented factors: sum over T subset of J of (-1)^|T| x_{I cup T}."""
        if self.max_index > arity:
            raise InputError(f"{self} uses a variable beyond arity {arity}")
        pos, neg = self.masks()
        acc = {}
        sub = neg
        while True:
            acc[pos | sub] = Fraction(-1 if sub.bit_count() % 2 else 1)
            if sub == 0:
                break
            sub = (sub - 1) & neg
        return MultilinearPoly._from_masks(arity, acc)

    def __str__(self):
        parts = [f"x{i}" for i in self.positive] + [f"(1-x{j})" for j in self.complemented]
        return "*".join(parts) if parts else "1"


def eval_signed_product(g: SignedProduct, x: Sequence[int]) -> int:
    if g.max_index > len(x):
        raise InputError(f"{g} uses x{g.max_index} but the point has {len(x)} coordinates")
    return int(g.holds_at_mask(point_to_mask(x, len(x))))


class BooleanFn:
    """A function {0,1}^n -> {0,1}.

    Backed either by an evaluator on 0/1 tuples or by a materialized truth
    table in mask order.  ``product`` is set when the function is a signed
    product, which lets certificates and models keep the compact form.
    """

    def __init__(self, arity: int, evaluator: Callable | None = None, *, table=None,
                 product: SignedProduct | None = None, name: str | None = None):
        if evaluator is None and table is None:
            raise InputError("BooleanFn needs an evaluator or a table")
        self.arity = arity
        self.product = product
        self.name = name
        self._evaluator = evaluator
        self._table = None
        if table is not None:
            bits = tuple(int(b) for b in table)
            if len(bits) != 1 << arity:
                raise InputError(f"truth table has {len(bits)} entries, expected {1 << arity}")
            if any(b not in (0, 1) for b in bits):
                raise InputError("truth table entries must be 0 or 1")
            self._table = bits

    @classmethod
    def from_product(cls, g: SignedProduct, arity: int) -> "BooleanFn":
        if g.max_index > arity:
            raise InputError(f"{g} uses a variable beyond arity {arity}")
        return cls(arity, lambda x: int(g.holds_at_mask(point_to_mask(x, arity))), product=g, name=str(g))

    @classmethod
    def from_table(cls, arity: int, bits, name: str | None = None) -> "BooleanFn":
        if isinstance(bits, str):
            bits = [int(ch) for ch in bits.strip()]
        return cls(arity, table=bits, name=name)

    def at_mask(self, point: int) -> int:
        if self._table is not None:
            return self._table[point]
        if self.product is not None:
            return int(self.product.holds_at_mask(point))
        value = self._evaluator(mask_to_point(point, self.arity))
        if value not in (0, 1):
            raise InputError(f"Boolean function returned {value!r}")
        return int(value)

    def __call__(self, x: Sequence[int]) -> int:
        return self.at_mask(point_to_mask(x, self.arity))

    def table(self, cap: int = TABLE_CAP) -> tuple:
        if self._table is None:
            check_cap("arity", self.arity, cap)
            self._table = tuple(self.at_mask(m) for m in range(1 << self.arity))
        return self._table

    def table_string(self) -> str:
        return "".join(map(str, self.table()))

    def __repr__(self):
        label = self.name or (str(self.product) if self.product else "table")
        return f"BooleanFn({self.arity}, {label})"


# -- certificates ------------------------------------------------------------


@dataclass(frozen=True)
class LinearizationCertificate:
    """``f(x) = a.x + beta + sum_i b_i g_i(x)`` with every ``b_i`` nonzero.

    Each ``g_i`` is a SignedProduct (family C, or M when nothing is
    complemented) or a BooleanFn (family B).
    """

    a: tuple
    beta: Fraction
    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(as_fraction(v) for v in self.a))
        object.__setattr__(self, "beta", as_fraction(self.beta))
        terms = tuple((g, as_fraction(b)) for g, b in self.terms)
        for g, b in terms:
            if b == 0:
                raise InputError("certificate terms need nonzero weights")
            if not isinstance(g, (SignedProduct, BooleanFn)):
                raise InputError(f"unsupported certificate function {g!r}")
        object.__setattr__(self, "terms", terms)

    @property
    def arity(self) -> int:
        return len(self.a)

    @property
    def size(self) -> int:
        return len(self.terms)

    @property
    def family(self) -> str:
        if all(isinstance(g, SignedProduct) and not g.complemented for g, _ in self.terms):
            return "M"
        if all(isinstance(g, SignedProduct) for g, _ in self.terms):
            return "C"
        return "B"

    def value_at_mask(self, point: int) -> Fraction:
        total = self.beta + sum((a for i, a in enumerate(self.a) if point >> i & 1), Fraction(0))
        for g, b in self.terms:
            hit = g.holds_at_mask(point) if isinstance(g, SignedProduct) else g.at_mask(point)
            if hit:
                total += b
        return total

    def __call__(self, x: Sequence[int]) -> Fraction:
        return self.value_at_mask(point_to_mask(x, self.arity))


def verify_certificate(f, arity: int, cert: LinearizationCertificate,
                       cap: int = ENUMERATION_CAP) -> bool:
    """Check the linearization identity at every point of {0,1}^arity."""
    check_cap("arity", arity, cap)
    if cert.arity != arity:
        raise InputError(f"certificate arity {cert.arity} does not match {arity}")
    for g, _ in cert.terms:
        g_arity = g.max_index if isinstance(g, SignedProduct) else g.arity
        if (isinstance(g, BooleanFn) and g_arity != arity) or g_arity > arity:
            raise InputError(f"certificate function {g!r} does not fit arity {arity}")
    table = _value_table(arity, f)
    return all(cert.value_at_mask(m) == v for m, v in enumerate(table))


# -- text format ---------------------------------------------------------------


def format_rational(value: Fraction) -> str:
    value = as_fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def format_poly(poly: MultilinearPoly) -> str:
    """Render in the line format: header ``n=<arity>`` then ``coeff * x1*x2`` per term."""
    lines = [f"n={poly.arity}"]
    for key, coeff in poly.terms:
        if key:
            lines.append(f"{format_rational(coeff)} * " + "*".join(f"x{i}" for i in key))
        else:
            lines.append(format_rational(coeff))
    return "\n".join(lines) + "\n"


def format_poly_expr(poly: MultilinearPoly) -> str:
    """One-line human form, e.g. ``5 - 4*x1 - 4*x3 + 8*x1*x3``."""
    out = []
    for key, coeff in poly.terms:
        mono = "*".join(f"x{i}" for i in key)
        mag = abs(coeff)
        if not key:
            body = format_rational(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{format_rational(mag)}*{mono}"
        if not out:
            out.append(("-" if coeff < 0 else "") + body)
        else:
            out.append(("- " if coeff < 0 else "+ ") + body)
    return " ".join(out) if out else "0"


_HEADER = re.compile(r"^n\s*=\s*(\d+)$")
_VAR = re.compile(r"^x(\d+)$")


def parse_poly(text: str) -> MultilinearPoly:
    """Inverse of :func:`format_poly`.  Blank lines and ``#`` comments are skipped."""
    arity = None
    terms: dict[tuple, Fraction] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if arity is None:
            m = _HEADER.match(line)
            if not m:
                raise InputError(f"line {lineno}: expected header 'n=<arity>', got {raw!r}")
            arity = int(m.group(1))
            continue
        coeff_text, _, mono_text = line.partition("*")
        try:
            coeff = Fraction(coeff_text.replace(" ", ""))
        except (ValueError, ZeroDivisionError):
            raise InputError(f"line {lineno}: bad coefficient {coeff_text.strip()!r}") from None
        key = []
        if mono_text.strip():
            for factor in mono_text.split("*"):
                m = _VAR.match(factor.strip())
                if not m:
                    raise InputError(f"line {lineno}: bad variable {factor.strip()!r}")
                i = int(m.group(1))
                if not 1 <= i <= arity:
                    raise InputError(f"line {lineno}: x{i} outside arity {arity}")
                key.append(i)
        k = tuple(sorted(set(key)))
        terms[k] = terms.get(k, Fraction(0)) + coeff
    if arity is None:
        raise InputError("empty polynomial file: missing 'n=<arity>' header")
    return MultilinearPoly(arity, terms)
