"""Low-autocorrelation binary sequences (the Bernasconi model).

Energy of a +-1 sequence ``s`` is ``sum_d C_d(s)**2`` with aperiodic
correlations ``C_d = sum_i s_i s_{i+d}``.  Substituting ``s = 2x - 1``
gives a pseudo-Boolean function of degree 4 whose IP formulations are
built here, next to an exhaustive solver used as ground truth.
"""

from __future__ import annotations

import contextlib
import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, check_cap
from .milp import (
    MilpModel,
    ModelBuilder,
    SolverBridgeConfig,
    add_nogood_rows,
    fortet_model,
    model_stats,
    solve_external,
)
from .poly import BooleanFn, MultilinearPoly, SignedProduct

EXPAND_CAP = 20
INDICATOR_ONLY_CAP = 8
EXHAUSTIVE_CAP = 28
PARITY, FULL_RANGE = "parity", "full_range"
UPPER_TRIANGLE, ORDERED_COMPAT = "upper_triangle", "ordered_compat"

with contextlib.suppress(ImportError):
    import numba


# -- sequences and energy ----------------------------------------------------


def parse_spins(text: str) -> tuple:
    """``'++-+'`` -> ``(1, 1, -1, 1)``."""
    table = {"+": 1, "-": -1}
    try:
        spins = tuple(table[ch] for ch in text.strip())
    except KeyError:
        raise InputError(f"spin sequences use '+' and '-' only, got {text!r}") from None
    if not spins:
        raise InputError("empty spin sequence")
    return spins


def format_spins(spins: Sequence[int]) -> str:
    return "".join("+" if s > 0 else "-" for s in spins)


def correlations(spins: Sequence[int]) -> list:
    n = len(spins)
    return [sum(spins[i] * spins[i + d] for i in range(n - d)) for d in range(1, n)]


def energy(spins: Sequence[int]) -> int:
    if isinstance(spins, str):
        spins = parse_spins(spins)
    if any(s not in (-1, 1) for s in spins):
        raise InputError("spins must be -1 or +1")
    return sum(c * c for c in correlations(spins))


def spins_from_bits(x: Sequence[int]) -> tuple:
    return tuple(2 * b - 1 for b in x)


# -- polynomial view ---------------------------------------------------------


def f_bern_poly(n: int, cap: int = EXPAND_CAP) -> MultilinearPoly:
    """Multilinear expansion of the energy in ``x`` with ``s_i = 2 x_i - 1``."""
    if n < 2:
        raise InputError(f"N must be at least 2, got {n}")
    check_cap("N", n, cap)
    total = MultilinearPoly(n)
    for d in range(1, n):
        inner = {}
        for i in range(1, n - d + 1):
            j = i + d
            # s_i s_j = 4 x_i x_j - 2 x_i - 2 x_j + 1
            for key, c in (((i, j), 4), ((i,), -2), ((j,), -2), ((), 1)):
                inner[key] = inner.get(key, 0) + c
        p = MultilinearPoly(n, inner)
        total = total + p * p
    return total


def degree4_count(n: int) -> int:
    """Number of quadruples p < q < r < s <= n with p + s = q + r."""
    count = 0
    for p in range(1, n + 1):
        for q in range(p + 1, n + 1):
            for r in range(q + 1, n + 1):
                if q + r - p <= n:
                    count += 1
    return count


def lcB_upper(n: int) -> int:
    """Number of value indicators, ``sum_d (N + 1 - d) = N(N+1)/2 - 1``; at most N^2."""
    if n < 3:
        raise InputError(f"N must be at least 3, got {n}")
    bound = sum(n + 1 - d for d in range(1, n))
    assert bound <= n * n
    return bound


def L_set(n: int, d: int, mode: str = PARITY) -> list:
    """Candidate values of the d-th correlation, ascending."""
    if not 1 <= d <= n - 1:
        raise InputError(f"d must lie in 1..{n - 1}, got {d}")
    m = n - d
    if mode == PARITY:
        return list(range(-m, m + 1, 2))
    if mode == FULL_RANGE:
        return list(range(-m, m + 1))
    raise InputError(f"unknown L_d mode {mode!r}")


# -- IP models ------------------------------------------------------------------


def standard_ip(n: int, cap: int = EXPAND_CAP) -> MilpModel:
    """One Fortet product variable per monomial of degree >= 2 of the expansion."""
    poly = f_bern_poly(n, cap)
    products = [(SignedProduct(key, ()), c) for key, c in poly.terms if len(key) >= 2]
    return fortet_model((poly.linear_coefficients(), poly.constant_term()), products, n, name=f"labs_standard_{n}")


def _z_name(d, ell):
    return f"z{d}_p{ell}" if ell >= 0 else f"z{d}_m{-ell}"


def _correlation_indicator(n, d, ell):
    def g(x):
        return int(sum((2 * x[i] - 1) * (2 * x[i + d] - 1) for i in range(n - d)) == ell)

    return BooleanFn(n, g, name=f"C{d}=={ell}")


def indicator_only_ip(n: int, cap: int = INDICATOR_ONLY_CAP) -> MilpModel:
    """Value indicators ``z<d>_<l>`` tied to x only through no-good rows."""
    if n < 3:
        raise InputError(f"N must be at least 3, got {n}")
    check_cap("N", n, cap)
    mb = ModelBuilder(f"labs_indicator_only_{n}")
    xs = [mb.add_binary(f"x{i}") for i in range(1, n + 1)]
    obj = []
    for d in range(1, n):
        for ell in L_set(n, d, PARITY):
            z = mb.add_binary(_z_name(d, ell))
            add_nogood_rows(mb, xs, _correlation_indicator(n, d, ell), z, z)
            obj.append((ell * ell, z))
    mb.set_objective(obj)
    return mb.build()


@dataclass(frozen=True)
class LabsInstance:
    """Sequence length plus the counting modes of the value-indicator model.

    The defaults give the model exactly as displayed (pair variables for
    i < j, L_d the parity progression).  ``compat()`` gives the variant whose
    sizes match the published table: a pair variable for every ordered pair
    (rows only for i < j) and L_d every integer in [-(N-d), N-d].
    """

    n: int
    ld_mode: str = PARITY
    pair_var_mode: str = UPPER_TRIANGLE

    def __post_init__(self):
        if self.n < 3:
            raise InputError(f"N must be at least 3, got {self.n}")
        if self.ld_mode not in (PARITY, FULL_RANGE):
            raise InputError(f"unknown L_d mode {self.ld_mode!r}")
        if self.pair_var_mode not in (UPPER_TRIANGLE, ORDERED_COMPAT):
            raise InputError(f"unknown pair variable mode {self.pair_var_mode!r}")

    @classmethod
    def compat(cls, n):
        return cls(n, FULL_RANGE, ORDERED_COMPAT)

    def L_set(self, d):
        return L_set(self.n, d, self.ld_mode)

    def value_indicator_ip(self) -> MilpModel:
        return value_indicator_ip(self.n, self.ld_mode, self.pair_var_mode)


def value_indicator_ip(n: int, ld_mode: str = PARITY, pair_var_mode: str = UPPER_TRIANGLE) -> MilpModel:
    """Pair-product variables ``y<i>_<j>`` (``2y - 1 = s_i s_j``) and value
    indicators ``z<d>_<l>``; objective ``sum l^2 z``."""
    LabsInstance(n, ld_mode, pair_var_mode)  # validates
    mb = ModelBuilder(f"labs_value_indicator_{n}")
    xs = {i: mb.add_binary(f"x{i}") for i in range(1, n + 1)}
    ys = {}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i < j or (i > j and pair_var_mode == ORDERED_COMPAT):
                ys[i, j] = mb.add_binary(f"y{i}_{j}")
    zs = {}
    obj = []
    for d in range(1, n):
        for ell in L_set(n, d, ld_mode):
            zs[d, ell] = mb.add_binary(_z_name(d, ell))
            obj.append((ell * ell, zs[d, ell]))
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            xi, xj, y = xs[i], xs[j], ys[i, j]
            mb.add_constraint(f"pa{i}_{j}", [(1, xi), (1, xj), (1, y)], ">=", 1)
            mb.add_constraint(f"pb{i}_{j}", [(1, xi), (-1, xj), (-1, y)], ">=", -1)
            mb.add_constraint(f"pc{i}_{j}", [(-1, xi), (1, xj), (-1, y)], ">=", -1)
            mb.add_constraint(f"pd{i}_{j}", [(1, xi), (1, xj), (-1, y)], "<=", 1)
    for d in range(1, n):
        mb.add_constraint(f"one{d}", [(1, zs[d, ell]) for ell in L_set(n, d, ld_mode)], "=", 1)
    for d in range(1, n):
        # sum_i (2 y_{i,i+d} - 1) = sum_l l z_{d,l}
        terms = [(2, ys[i, i + d]) for i in range(1, n - d + 1)]
        terms += [(-ell, zs[d, ell]) for ell in L_set(n, d, ld_mode)]
        mb.add_constraint(f"val{d}", terms, "=", n - d)
    mb.set_objective(obj)
    return mb.build()


# -- exhaustive search ---------------------------------------------------------------


@dataclass(frozen=True)
class LabsResult:
    optimum: int
    witness: tuple
    points: int
    elapsed: float


def _scan(spins, free_start):
    """Gray-code walk over spins[free_start:], starting from the given array.

    Returns (best energy, best spins).  Ties go to the lexicographically
    smallest sequence (-1 before +1).
    """
    n = spins.shape[0]
    s = spins.copy()
    corr = np.zeros(n, dtype=np.int64)
    for d in range(1, n):
        acc = 0
        for i in range(n - d):
            acc += s[i] * s[i + d]
        corr[d] = acc
    best = 0
    for d in range(1, n):
        best += corr[d] * corr[d]
    best_s = s.copy()
    free = n - free_start
    for step in range(1, 1 << free):
        bit = 0
        t = step
        while t & 1 == 0:
            t >>= 1
            bit += 1
        j = n - 1 - bit
        sj = s[j]
        for d in range(1, n):
            nb = 0
            if j - d >= 0:
                nb += s[j - d]
            if j + d < n:
                nb += s[j + d]
            corr[d] -= 2 * sj * nb
        s[j] = -sj
        e = 0
        for d in range(1, n):
            e += corr[d] * corr[d]
        if e <= best:
            better = e < best
            if not better:
                for i in range(n):
                    if s[i] != best_s[i]:
                        better = s[i] < best_s[i]
                        break
            if better:
                best = e
                for i in range(n):
                    best_s[i] = s[i]
    return best, best_s


_scan_py = _scan
_scan_fast = numba.njit(cache=False)(_scan) if "numba" in globals() else None


def _scan_slice(args):
    n, prefix, use_fast = args
    spins = np.ones(n, dtype=np.int64)
    spins[: len(prefix)] = prefix
    if use_fast and _scan_fast is not None:
        e, s = _scan_fast(spins, len(prefix))
    else:
        e, s = _scan_py(spins, len(prefix))
    return int(e), tuple(int(v) for v in s)


def exhaustive_solve(n: int, workers: int = 1, cap: int = EXHAUSTIVE_CAP, accelerate: bool = True) -> LabsResult:
    """Minimum energy over all sequences with ``s_1 = +1`` (negation symmetry).

    The free spins are split into 2^k slices by fixing the next k spins; each
    slice is a Gray-code walk with O(N) incremental correlation updates.
    Slices are combined by (energy, sequence), so the witness is the
    lexicographically smallest optimal sequence whatever ``workers`` is.
    """
    if n < 1:
        raise InputError(f"N must be positive, got {n}")
    check_cap("N", n, cap)
    start = time.perf_counter()
    if n == 1:
        return LabsResult(0, (1,), 1, time.perf_counter() - start)
    k = min(n - 1, 4)
    tasks = []
    for code in range(1 << k):
        prefix = [1] + [(-1 if code >> (k - 1 - b) & 1 else 1) for b in range(k)]
        tasks.append((n, prefix, accelerate))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_slice, tasks))
    else:
        results = [_scan_slice(t) for t in tasks]
    best_e, best_s = min(results)
    assert energy(best_s) == best_e
    return LabsResult(best_e, best_s, 1 << (n - 1), time.perf_counter() - start)


# -- Table harness ---------------------------------------------------------------------

CSV_FIELDS = ("N", "opt", "std_vars", "std_cons", "std_bound", "vi_vars", "vi_cons", "vi_bound", "nodes", "time_s")


@dataclass
class TableRow:
    N: int
    opt: int | None = None
    std_vars: int | None = None
    std_cons: int | None = None
    std_bound: float | None = None
    vi_vars: int | None = None
    vi_cons: int | None = None
    vi_bound: float | None = None
    nodes: int | None = None
    time_s: float | None = None


def table_harness(ns, *, opt_cap: int = 20, std_cap: int = EXPAND_CAP, compat: bool = True,
                  bound_instance=None, bridge: SolverBridgeConfig | None = None, workers: int = 1,
                  timing: bool = False) -> list:
    """Per-N rows mirroring the published comparison table.

    OPT comes from :func:`exhaustive_solve` for N <= opt_cap; ``nodes`` is the
    number of sequences it enumerated.  LP bounds need a solver bridge and
    stay blank otherwise.  ``time_s`` is only filled with ``timing=True``
    since wall-clock times would break byte-identical reports.

    Sizes use the counting selected by ``compat``; the value-indicator bound
    is taken from ``bound_instance(n)``, by default the displayed model
    (parity L_d), since widening L_d to every integer weakens the LP
    relaxation to 0.
    """
    if bound_instance is None:
        bound_instance = LabsInstance
    rows = []
    for n in ns:
        row = TableRow(n)
        if n <= opt_cap:
            res = exhaustive_solve(n, workers=workers)
            row.opt, row.nodes = res.optimum, res.points
            if timing:
                row.time_s = res.elapsed
        if n <= std_cap:
            std = standard_ip(n, std_cap)
            row.std_vars, row.std_cons, _ = model_stats(std)
            if bridge is not None:
                row.std_bound = solve_external(std, bridge).objective
        inst = LabsInstance.compat(n) if compat else LabsInstance(n)
        vi = inst.value_indicator_ip()
        row.vi_vars, row.vi_cons, _ = model_stats(vi)
        if bridge is not None:
            row.vi_bound = solve_external(bound_instance(n).value_indicator_ip(), bridge).objective
        rows.append(row)
    return rows


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        text = f"{value:.6f}".rstrip("0").rstrip(".")
        return "0" if text in ("-0", "") else text
    return str(value)


def format_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for row in rows:
        writer.writerow([_cell(getattr(row, f)) for f in CSV_FIELDS])
    return buf.getvalue()


def format_table(rows) -> str:
    cells = [list(CSV_FIELDS)] + [[_cell(getattr(r, f)) for f in CSV_FIELDS] for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(CSV_FIELDS))]
    return "".join("  ".join(c.rjust(w) for c, w in zip(line, widths)).rstrip() + "\n" for line in cells)


def bits_of(spins: Sequence[int]) -> tuple:
    return tuple(1 if s > 0 else 0 for s in spins)


def energy_at_mask(n: int, mask: int) -> int:
    return energy(tuple(1 if mask >> i & 1 else -1 for i in range(n)))


__all__ = [
    "LabsInstance", "LabsResult", "TableRow", "L_set", "degree4_count", "energy", "exhaustive_solve",
    "f_bern_poly", "format_csv", "format_spins", "format_table", "indicator_only_ip", "lcB_upper",
    "parse_spins", "standard_ip", "table_harness", "value_indicator_ip",
]
