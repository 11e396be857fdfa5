"""Linearization complexity with respect to monomials, signed products and
arbitrary Boolean functions.

* lc_M is read off the polynomial: the number of monomials of degree >= 2.
* lc_B is bounded above by the smallest k such that some w in Q^k has every
  value of the nonlinear part among its subset sums (:func:`min_pss_cover`),
  and computed exactly by :func:`lc_boolean`.
* lc_C is found by an exact minimum-support search over signed products
  (:func:`lc_signed_products_exact`).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import gcd, lcm
from typing import Sequence

from .errors import CapExceededError, InputError, check_cap
from .poly import (
    ENUMERATION_CAP,
    BooleanFn,
    LinearizationCertificate,
    MultilinearPoly,
    SignedProduct,
    as_fraction,
    format_rational,
    degree,
    interpolate,
    mask_to_key,
    monomial_count_deg2plus,
    nonlinear_part,
    nonlinear_values,
    value_table,
)

PSS_LENGTH_CAP = 24
COVER_TARGET_CAP = 10
COVER_K_CAP = 8
LC_C_ARITY_CAP = 6
LC_B_ARITY_CAP = 5


def trivial_upper_bound(n: int) -> int:
    """``2**n - n - 1``: the number of monomials of degree >= 2 on n variables."""
    if n < 1:
        raise InputError(f"n must be positive, got {n}")
    return 2**n - n - 1


# -- partial sum sets ------------------------------------------------------


@dataclass(frozen=True)
class PartialSumSet:
    generator: tuple
    sums: frozenset

    def __contains__(self, value):
        return as_fraction(value) in self.sums

    def __len__(self):
        return len(self.sums)


def partial_sum_set(w: Sequence, cap: int = PSS_LENGTH_CAP) -> PartialSumSet:
    """All subset sums of ``w``; the empty vector gives {0}."""
    check_cap("len(w)", len(w), cap)
    gen = tuple(as_fraction(v) for v in w)
    sums = {Fraction(0)}
    for v in gen:
        sums |= {s + v for s in sums}
    return PartialSumSet(gen, frozenset(sums))


def _subset_sums_by_mask(w: Sequence[Fraction]) -> dict:
    """First mask (in increasing mask order) realizing each subset sum."""
    sums = [Fraction(0)] * (1 << len(w))
    first: dict[Fraction, int] = {Fraction(0): 0}
    for mask in range(1, 1 << len(w)):
        low = mask & -mask
        sums[mask] = sums[mask ^ low] + w[low.bit_length() - 1]
        first.setdefault(sums[mask], mask)
    return first


@dataclass(frozen=True)
class CoverResult:
    """Minimum k with a witness w whose subset sums contain every target.

    ``assignment`` maps each target to the 1-based coordinates it sums.
    """

    k: int
    w: tuple
    assignment: dict = field(default_factory=dict)

    def check(self) -> bool:
        return all(sum((self.w[i - 1] for i in idx), Fraction(0)) == y
                   for y, idx in self.assignment.items())


class _Echelon:
    """Row echelon form over Q for rows ``[coefficients | rhs]``."""

    __slots__ = ("rows", "width")

    def __init__(self, width):
        self.rows: dict[int, list] = {}  # pivot column -> row
        self.width = width

    def copy(self):
        e = _Echelon(self.width)
        e.rows = dict(self.rows)
        return e

    def add(self, row):
        """Insert ``row``; returns +1 if rank grew, 0 if redundant, -1 if inconsistent."""
        v = list(row)
        for col in sorted(self.rows):
            if v[col]:
                piv = self.rows[col]
                f = v[col] / piv[col]
                v = [a - f * b for a, b in zip(v, piv)]
        for col in range(self.width):
            if v[col]:
                self.rows[col] = v
                return 1
        return -1 if v[self.width] else 0

    def solve(self):
        """Unique solution when the rank equals ``width``."""
        x = [Fraction(0)] * self.width
        for col in sorted(self.rows, reverse=True):
            row = self.rows[col]
            acc = row[self.width] - sum((row[j] * x[j] for j in range(col + 1, self.width)), Fraction(0))
            x[col] = acc / row[col]
        return x


def _candidate_masks(k: int, introduced: int):
    """Nonempty subsets of k coordinates in which fresh coordinates form a
    prefix of the not-yet-used ones; unused coordinates are interchangeable."""
    out = []
    for fresh in range(0, k - introduced + 1):
        block = ((1 << fresh) - 1) << introduced
        for old in range(1 << introduced):
            mask = old | block
            if mask:
                out.append((mask, introduced + fresh))
    out.sort()
    return out


def _cover_with_k(ys: list, k: int):
    """Search for w in Q^k covering ``ys`` (distinct, nonzero).  Depth-first over
    the assignment of each target to a coordinate subset, with incremental
    exact elimination.  Only full-rank assignments are explored, which is
    enough when every smaller k has already been refuted."""
    m = len(ys)

    def finish(basis, masks):
        w = basis.solve()
        sums = _subset_sums_by_mask(w)
        rest = []
        for y in ys[len(masks):]:
            if y not in sums:
                return None
            rest.append(sums[y])
        return w, masks + rest

    def dfs(pos, basis, introduced, masks, used):
        rank = len(basis.rows)
        if rank == k:
            return finish(basis, masks)
        if m - pos < k - rank:
            return None
        y = ys[pos]
        for mask, new_intro in _candidate_masks(k, introduced):
            if mask in used:
                continue
            row = [Fraction((mask >> j) & 1) for j in range(k)] + [y]
            nb = basis.copy()
            status = nb.add(row)
            if status < 0:
                continue
            found = dfs(pos + 1, nb, new_intro, masks + [mask], used | {mask})
            if found is not None:
                return found
        return None

    return dfs(0, _Echelon(k), 0, [], frozenset())


def cover_lower_bound(targets) -> int:
    """ceil(log2 |Y with 0|): 2^k subset sums must reach every target."""
    nonzero = {as_fraction(y) for y in targets} - {0}
    return len(nonzero).bit_length()


def min_pss_cover(targets, k_cap: int = COVER_K_CAP, target_cap: int = COVER_TARGET_CAP) -> CoverResult:
    """Smallest k and w in Q^k with ``pss(w)`` containing every target.

    k is searched upward from ``ceil(log2 |Y with 0|)``; ``k = |Y minus 0|`` is
    always feasible by taking w to be the nonzero targets themselves.
    """
    values = {as_fraction(y) for y in targets}
    check_cap("|Y|", len(values), target_cap)
    ys = sorted(values - {0}, key=lambda v: (-abs(v), v))
    lower = len(ys).bit_length()
    for k in range(lower, min(len(ys), k_cap + 1)):
        found = _cover_with_k(ys, k)
        if found is not None:
            w, masks = found
            result = _make_cover(values, ys, tuple(w), masks)
            break
    else:
        if len(ys) > k_cap:
            raise CapExceededError("k", len(ys), k_cap,
                                   detail=f"no cover with k <= {k_cap}; lc lies in [{max(lower, k_cap + 1)}, {len(ys)}]")
        w = tuple(sorted(ys))
        masks = [1 << w.index(y) for y in ys]
        result = _make_cover(values, ys, w, masks)
    if not result.check():  # pragma: no cover - internal consistency guard
        raise AssertionError("cover witness does not reproduce its targets")
    return result


def _make_cover(values, ys, w, masks):
    assignment = {y: mask_to_key(mask) for y, mask in zip(ys, masks)}
    if 0 in values:
        assignment[Fraction(0)] = ()
    return CoverResult(len(w), tuple(w), dict(sorted(assignment.items())))


def pss_cover_bound(f, arity: int, cap: int = ENUMERATION_CAP, k_cap: int = COVER_K_CAP,
                    target_cap: int = COVER_TARGET_CAP) -> CoverResult:
    """Minimum pss cover of the range of the nonlinear part of f.

    Every cover yields a Boolean linearization (see
    :func:`certificate_from_cover`), so ``k`` is an upper bound on lc_B(f).
    It is not always tight: for x1x2 + x1x3 + x2x3 - x1x2x3 the range is
    {0, 1, 2} (k = 2) while (1-x1)(1-x2)(1-x3) alone linearizes f.
    """
    targets = set(nonlinear_values(arity, f, cap))
    return min_pss_cover(targets, k_cap=k_cap, target_cap=target_cap)


@dataclass(frozen=True)
class BooleanSearch:
    """Outcome of the lc_B search; ``exact`` as in :class:`SignedProductSearch`."""

    certificate: LinearizationCertificate
    exact: bool
    lower_bound: int
    targets: frozenset
    pss_cover: CoverResult | None

    @property
    def k(self):
        return self.certificate.size


def _boolean_support(tilde, n, k, deadline):
    """Find Boolean g_1..g_k (each with g_i(0) = 0) and w with
    ``tilde(x) = sum_i w_i * nl(g_i)(x)`` at every point with two or more ones.

    Since nl(g)(x) = g(x) - sum_{j in x} g(e_j) once g(0) = 0, the unit-vector
    values of the g_i are chosen first, then the subset S_x = {i : g_i(x) = 1}
    point by point with incremental elimination on w.  Complementing g_i is
    absorbed by beta, which is why g_i(0) = 0 loses nothing.
    """
    units = [1 << j for j in range(n)]
    rest = sorted((m for m in range(1 << n) if m.bit_count() >= 2), key=lambda m: (m.bit_count(), m))
    ticks = [0]

    def tick():
        ticks[0] += 1
        if ticks[0] % 512 == 0 and time.monotonic() > deadline:
            raise TimeoutError

    def subsets(introduced):
        for fresh in range(0, k - introduced + 1):
            block = ((1 << fresh) - 1) << introduced
            for old in range(1 << introduced):
                yield old | block, introduced + fresh

    def row_for(x, s_x, unit_sets):
        coeffs = []
        for i in range(k):
            c = (s_x >> i) & 1
            for j in range(n):
                if x >> j & 1 and unit_sets[j] >> i & 1:
                    c -= 1
            coeffs.append(Fraction(c))
        return coeffs + [tilde[x]]

    def finish(basis, unit_sets, chosen):
        w = basis.solve()
        sums = _subset_sums_by_mask(w)
        s_sets = dict(chosen)
        for x in rest[len(chosen):]:
            shift = sum((w[i] for j in range(n) if x >> j & 1 for i in range(k) if unit_sets[j] >> i & 1),
                        Fraction(0))
            need = tilde[x] + shift
            if need not in sums:
                return None
            s_sets[x] = sums[need]
        return w, unit_sets, s_sets

    def phase2(pos, basis, introduced, unit_sets, chosen):
        tick()
        rank = len(basis.rows)
        if rank == k:
            return finish(basis, unit_sets, chosen)
        if len(rest) - pos < k - rank:
            return None
        x = rest[pos]
        for s_x, intro in subsets(introduced):
            nb = basis.copy()
            if nb.add(row_for(x, s_x, unit_sets)) < 0:
                continue
            hit = phase2(pos + 1, nb, intro, unit_sets, chosen + [(x, s_x)])
            if hit is not None:
                return hit
        return None

    def phase1(j, introduced, unit_sets):
        if j == n:
            return phase2(0, _Echelon(k), introduced, unit_sets, [])
        for s, intro in subsets(introduced):
            hit = phase1(j + 1, intro, unit_sets + [s])
            if hit is not None:
                return hit
        return None

    found = phase1(0, 0, [])
    if found is None:
        return None
    w, unit_sets, s_sets = found
    tables = []
    for i in range(k):
        bits = [0] * (1 << n)
        for j, m in enumerate(units):
            bits[m] = unit_sets[j] >> i & 1
        for x, s in s_sets.items():
            bits[x] = s >> i & 1
        tables.append(bits)
    return w, tables


def lc_boolean(f, arity: int, time_limit: float = 60.0, arity_cap: int = LC_B_ARITY_CAP,
               k_cap: int = COVER_K_CAP, target_cap: int = COVER_TARGET_CAP) -> BooleanSearch:
    """lc_B(f): fewest arbitrary Boolean functions in a linearization of f.

    The upper bound comes from the cheaper of the pss cover of the nonlinear
    range and the monomial linearization; smaller sizes are then refuted or
    realized by :func:`_boolean_support`.
    """
    check_cap("arity", arity, arity_cap)
    table = value_table(arity, f, arity_cap)
    tilde = nonlinear_values(arity, table, arity_cap)
    targets = frozenset(tilde)
    poly = interpolate(arity, table, arity_cap)
    best = monomial_certificate(poly)
    cover = None
    try:
        cover = min_pss_cover(targets, k_cap=k_cap, target_cap=target_cap)
    except CapExceededError:
        pass
    if cover is not None and cover.k < best.size:
        best = certificate_from_cover(table, arity, cover, arity_cap)
    deadline = time.monotonic() + time_limit
    lower = 1 if best.size else 0
    try:
        for k in range(1, best.size):
            hit = _boolean_support(tilde, arity, k, deadline)
            if hit is not None:
                best = _boolean_certificate(table, arity, *hit)
                break
            lower = k + 1
        else:
            lower = best.size
    except TimeoutError:
        pass
    return BooleanSearch(best, lower >= best.size, min(lower, best.size), targets, cover)


def _boolean_certificate(table, arity, w, tables):
    f0 = table[0]
    terms = [(BooleanFn.from_table(arity, bits, name=f"g{i + 1}"), wi)
             for i, (bits, wi) in enumerate(zip(tables, w))]
    # a.x + beta absorbs whatever the g_i contribute at 0 and the unit vectors
    a = tuple(table[1 << j] - f0 - sum((wi for bits, wi in zip(tables, w) if bits[1 << j]), Fraction(0))
              for j in range(arity))
    return LinearizationCertificate(a, f0, tuple((g, b) for g, b in terms if b != 0))


def certificate_from_cover(f, arity: int, cover: CoverResult, cap: int = ENUMERATION_CAP) -> LinearizationCertificate:
    """Turn a cover into Boolean functions: g_i(x) = 1 iff coordinate i is in the
    subset assigned to the nonlinear value at x."""
    table = value_table(arity, f, cap)
    f0 = table[0]
    a = tuple(table[1 << i] - f0 for i in range(arity))
    tilde = nonlinear_values(arity, table, cap)
    bits = [[0] * len(tilde) for _ in range(cover.k)]
    for mask, y in enumerate(tilde):
        for i in cover.assignment[y]:
            bits[i - 1][mask] = 1
    terms = [(BooleanFn.from_table(arity, b, name=f"g{i + 1}"), w)
             for i, (b, w) in enumerate(zip(bits, cover.w)) if w != 0]
    return LinearizationCertificate(a, f0, tuple(terms))


def monomial_certificate(poly: MultilinearPoly) -> LinearizationCertificate:
    """The linearization that uses one monomial per term of degree >= 2."""
    terms = tuple((SignedProduct(key, ()), c) for key, c in poly.terms if len(key) >= 2)
    return LinearizationCertificate(poly.linear_coefficients(), poly.constant_term(), terms)


def lc_monomials(poly: MultilinearPoly) -> int:
    return monomial_count_deg2plus(poly)


# -- signed products ----------------------------------------------------------


@dataclass(frozen=True)
class LcSearchBudget:
    max_degree: int | None = None  # defaults to the arity
    max_support: int | None = None  # defaults to lc_M
    time_limit: float = 60.0

    def __post_init__(self):
        for name in ("max_degree", "max_support"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise InputError(f"{name} must be positive")
        if self.time_limit <= 0:
            raise InputError("time_limit must be positive")


@dataclass(frozen=True)
class SignedProductSearch:
    """Outcome of the lc_C search.

    ``exact`` is true when no linearization with fewer than
    ``certificate.size`` signed products exists; otherwise the budget ran
    out and ``lower_bound`` is the best proven bound.  Both refer to the
    searched family (degree at most ``max_degree``).  If that family cannot
    linearize f within the budget, the monomial certificate is returned with
    ``exact`` false even though it may use larger degrees.
    """

    certificate: LinearizationCertificate
    exact: bool
    lower_bound: int
    candidates: int

    @property
    def size(self):
        return self.certificate.size


def signed_product_candidates(arity: int, max_degree: int) -> list:
    """All signed products with 2 <= degree <= max_degree, ordered by
    (degree, I, J)."""
    out = []
    for deg in range(2, min(max_degree, arity) + 1):
        for support in combinations(range(1, arity + 1), deg):
            for pos_mask in range(1 << deg):
                pos = tuple(v for b, v in enumerate(support) if pos_mask >> b & 1)
                neg = tuple(v for b, v in enumerate(support) if not pos_mask >> b & 1)
                out.append(SignedProduct(pos, neg))
    out.sort(key=SignedProduct.sort_key)
    return out


def _primitive(vec):
    """Scale an integer vector to the primitive one with positive leading entry."""
    g = 0
    lead = 0
    for v in vec:
        if v:
            g = gcd(g, v)
            if not lead:
                lead = v
    if not g:
        return tuple(vec)
    if lead < 0:
        g = -g
    return tuple(v // g for v in vec)


def _reduce(vec, basis):
    """Fraction-free reduction of an integer vector against ``basis``
    (list of (pivot, row)); returns a primitive integer vector."""
    v = list(vec)
    for piv, row in basis:
        if v[piv]:
            a, b = row[piv], v[piv]
            v = [a * x - b * y for x, y in zip(v, row)]
    return _primitive(v)


def _first_nonzero(vec):
    for i, v in enumerate(vec):
        if v:
            return i
    return -1


def _solve_combination(columns, target):
    """Exact coefficients c with sum c_i columns_i = target, or None."""
    n = len(columns)
    rows = [[Fraction(col[r]) for col in columns] + [Fraction(target[r])] for r in range(len(target))]
    ech = _Echelon(n)
    for row in rows:
        if ech.add(row) < 0:
            return None
    if len(ech.rows) < n:
        return None
    return ech.solve()


def lc_signed_products_exact(poly: MultilinearPoly, budget: LcSearchBudget | None = None,
                             arity_cap: int = LC_C_ARITY_CAP) -> SignedProductSearch:
    """Minimum-size linearization by signed products g_{I,J} of degree >= 2.

    Works on the nonlinear part: ``nl(f)`` must lie in the span of the
    nonlinear parts of the chosen products.  Support sizes are tried in
    increasing order; for size s every independent (s-1)-subset S of
    candidates (in lexicographic candidate order) is completed by the first
    later candidate whose residual modulo span(S) is parallel to the residual
    of the target.  The first hit is therefore the lexicographically first
    minimal support.
    """
    budget = budget or LcSearchBudget()
    n = poly.arity
    check_cap("arity", n, arity_cap)
    target_poly = nonlinear_part(poly)
    upper = monomial_certificate(poly)
    ub = upper.size
    max_degree = budget.max_degree or n
    # the monomial certificate bounds the search only if it lies in the family
    in_family = degree(poly) <= max_degree
    cap = ub if in_family else (1 << n) - n - 1
    max_support = cap if budget.max_support is None else min(cap, budget.max_support)
    cands = signed_product_candidates(n, max_degree)
    deadline = time.monotonic() + budget.time_limit

    if ub == 0:
        return SignedProductSearch(upper, True, 0, len(cands))

    monos = [m for m in range(1 << n) if m.bit_count() >= 2]
    index = {m: i for i, m in enumerate(monos)}

    def to_vec(p: MultilinearPoly, scale=1):
        v = [0] * len(monos)
        for m, c in p.mask_terms():
            if m in index:
                v[index[m]] = int(c * scale)
        return v

    den = lcm(*(c.denominator for _, c in target_poly.mask_terms()))
    target = tuple(to_vec(target_poly, den))
    target_prim = _primitive(target)
    vecs = [tuple(to_vec(g.to_poly(n))) for g in cands]
    prims = [_primitive(v) for v in vecs]

    def found_certificate(chosen):
        cols = [vecs[i] for i in chosen]
        coeffs = _solve_combination(cols, target)
        coeffs = [c / den for c in coeffs]
        rest = poly
        for i, c in zip(chosen, coeffs):
            rest = rest - cands[i].to_poly(n) * c
        terms = tuple((cands[i], c) for i, c in zip(chosen, coeffs))
        return LinearizationCertificate(rest.linear_coefficients(), rest.constant_term(), terms)

    ticks = 0

    def out_of_time():
        nonlocal ticks
        ticks += 1
        return ticks % 256 == 0 and time.monotonic() > deadline

    class _Timeout(Exception):
        pass

    def search(size):
        """Lexicographically first support of ``size`` candidates, or None."""
        if size == 1:
            for i, p in enumerate(prims):
                if p == target_prim:
                    return [i]
            return None

        def dfs(start, basis, chosen):
            if out_of_time():
                raise _Timeout
            if len(chosen) == size - 1:
                r = _reduce(target, basis)
                if _first_nonzero(r) < 0:
                    return None
                last = chosen[-1]
                for j in range(last + 1, len(cands)):
                    if _reduce(prims[j], basis) == r:
                        return chosen + [j]
                return None
            need = size - 1 - len(chosen)
            for i in range(start, len(cands) - need):
                red = _reduce(prims[i], basis)
                piv = _first_nonzero(red)
                if piv < 0:
                    continue  # dependent prefixes never give a minimal support
                hit = dfs(i + 1, basis + [(piv, red)], chosen + [i])
                if hit is not None:
                    return hit
            return None

        return dfs(0, [], [])

    lower = 1
    try:
        for size in range(1, max_support + 1):
            hit = search(size)
            if hit is not None:
                return SignedProductSearch(found_certificate(hit), True, size, len(cands))
            lower = size + 1
    except _Timeout:
        pass
    if not in_family:
        return SignedProductSearch(upper, False, lower, len(cands))
    return SignedProductSearch(upper, lower >= ub, min(lower, ub), len(cands))


# -- certificate text format ------------------------------------------------------


def format_certificate(cert: LinearizationCertificate) -> str:
    """Header (arity, size, beta), one line per a_i, one line per term."""
    lines = [f"arity={cert.arity}", f"size={cert.size}", f"beta={format_rational(cert.beta)}"]
    lines += [f"a{i}={format_rational(v)}" for i, v in enumerate(cert.a, 1)]
    for g, b in cert.terms:
        if isinstance(g, SignedProduct):
            tag = "M" if not g.complemented else "C"
            pos = ",".join(map(str, g.positive)) or "-"
            neg = ",".join(map(str, g.complemented)) or "-"
            lines.append(f"term {tag} I={pos} J={neg} b={format_rational(b)}")
        else:
            lines.append(f"term B table={g.table_string()} b={format_rational(b)}")
    return "\n".join(lines) + "\n"


def _index_list(text):
    return () if text == "-" else tuple(int(t) for t in text.split(","))


def parse_certificate(text: str) -> LinearizationCertificate:
    header = {}
    a = {}
    terms = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("term "):
                fields = dict(part.split("=", 1) for part in line.split()[2:])
                tag = line.split()[1]
                b = Fraction(fields["b"])
                if tag in ("M", "C"):
                    g = SignedProduct(_index_list(fields["I"]), _index_list(fields["J"]))
                elif tag == "B":
                    table = fields["table"]
                    g = BooleanFn.from_table(len(table).bit_length() - 1, table)
                else:
                    raise InputError(f"unknown family tag {tag!r}")
                terms.append((g, b))
            else:
                key, value = (s.strip() for s in line.split("=", 1))
                if key.startswith("a") and key[1:].isdigit():
                    a[int(key[1:])] = Fraction(value)
                else:
                    header[key] = value
        except (ValueError, KeyError) as exc:
            raise InputError(f"line {lineno}: cannot parse {raw!r}") from exc
    try:
        arity = int(header["arity"])
        beta = Fraction(header["beta"])
    except KeyError as exc:
        raise InputError(f"certificate missing header field {exc}") from None
    if sorted(a) != list(range(1, arity + 1)):
        raise InputError("certificate must list a1..a<arity>")
    cert = LinearizationCertificate(tuple(a[i] for i in range(1, arity + 1)), beta, tuple(terms))
    if "size" in header and int(header["size"]) != cert.size:
        raise InputError(f"size header {header['size']} disagrees with {cert.size} terms")
    return cert
