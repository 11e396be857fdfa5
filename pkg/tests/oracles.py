"""Independent brute-force oracles shared by the test modules.

Nothing here calls into the search code it is used to check.
"""

from fractions import Fraction
from itertools import combinations, product

import numpy as np


# -- integer points of a model ------------------------------------------------


def _components(names, constraints):
    parent = {v: v for v in names}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for con in constraints:
        free = [v for _, v in con.terms if v in parent]
        for a, b in zip(free, free[1:]):
            parent[find(a)] = find(b)
    groups = {}
    for v in names:
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


def _number(q):
    return int(q) if q.denominator == 1 else q


class _Compiled:
    """Rows with plain-int coefficients and per-component row lists, built once
    per (model, fixed variable set)."""

    def __init__(self, model, fixed_names):
        self.rows = [(tuple((_number(c), v) for c, v in con.terms), con.sense, _number(con.rhs))
                     for con in model.constraints]
        rest = [v for v in model.var_names() if v not in fixed_names]
        self.components = []
        touched = set()
        for comp in _components(rest, model.constraints):
            cset = set(comp)
            rows = [i for i, con in enumerate(model.constraints) if any(v in cset for _, v in con.terms)]
            touched.update(rows)
            self.components.append((comp, [self.rows[i] for i in rows]))
        self.fixed_only = [self.rows[i] for i in range(len(self.rows)) if i not in touched]


_CACHE = {}


def _holds(row, values):
    terms, sense, rhs = row
    act = sum(c * values[v] for c, v in terms)
    if sense == "<=":
        return act <= rhs
    if sense == ">=":
        return act >= rhs
    return act == rhs


def completions(model, fixed):
    """All 0/1 assignments of the remaining (binary) variables that satisfy
    every row, with ``fixed`` holding the x values.

    Returns a list of per-component lists of partial assignments; the
    feasible completions are their Cartesian product.
    """
    key = (id(model), frozenset(fixed))
    if key not in _CACHE:
        _CACHE.clear()
        _CACHE[key] = (model, _Compiled(model, set(fixed)))
    compiled = _CACHE[key][1]
    if not all(_holds(r, fixed) for r in compiled.fixed_only):
        return [[]]
    out = []
    for comp, rows in compiled.components:
        found = []
        values = dict(fixed)
        for bits in product((0, 1), repeat=len(comp)):
            values.update(zip(comp, bits))
            if all(_holds(r, values) for r in rows):
                found.append(dict(zip(comp, bits)))
        out.append(found)
    return out


def unique_completion(model, fixed):
    """The single feasible completion at ``fixed``, or None if there are 0 or >1."""
    comps = completions(model, fixed)
    if any(len(c) != 1 for c in comps):
        return None
    values = dict(fixed)
    for c in comps:
        values.update(c[0])
    return values


def objective(model, values):
    return model.offset + sum(c * values[v] for c, v in model.objective)


# -- partial-sum-set covers ------------------------------------------------------------


def _exactly_solvable(cols, ys):
    """Is ys in the span of the 0/1 columns?  Exact Gauss-Jordan over Q."""
    rows = [[Fraction(c[r]) for c in cols] + [Fraction(ys[r])] for r in range(len(ys))]
    k = len(cols)
    rank = 0
    for col in range(k):
        piv = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        pv = rows[rank][col]
        rows[rank] = [v / pv for v in rows[rank]]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return all(row[-1] == 0 for row in rows[rank:])


def cover_feasible(targets, k, chunk=50000):
    """Do k numbers exist whose subset sums include every target?

    Exhaustive over assignment matrices: rows are the nonzero targets,
    columns say which targets use each w_j.  Column order is irrelevant and a
    repeated or all-zero column can be merged away, so k-sets of distinct
    nonzero columns cover every case (a smaller solution pads with w_j = 0).
    A batched float projection discards clearly inconsistent systems; every
    candidate it keeps is re-decided exactly.
    """
    ys = sorted({Fraction(t) for t in targets} - {0})
    m = len(ys)
    if m == 0:
        return True
    if k == 0:
        return False
    cols = [tuple((c >> r) & 1 for r in range(m)) for c in range(1, 1 << m)]
    if k >= len(cols):
        k = len(cols)
    y = np.array([float(v) for v in ys])
    col_arr = np.array(cols, dtype=float)
    combos = combinations(range(len(cols)), k)
    while True:
        batch = []
        for _ in range(chunk):
            nxt = next(combos, None)
            if nxt is None:
                break
            batch.append(nxt)
        if not batch:
            return False
        idx = np.array(batch)
        mats = np.transpose(col_arr[idx], (0, 2, 1))  # (b, m, k)
        proj = (mats @ (np.linalg.pinv(mats) @ y[:, None]))[..., 0]
        resid = np.abs(proj - y).max(axis=1)
        for i in np.nonzero(resid < 1e-6)[0]:
            if _exactly_solvable([cols[j] for j in batch[i]], ys):
                return True
        if len(batch) < chunk:
            return False


def min_cover_oracle(targets, k_max=8):
    for k in range(k_max + 1):
        if cover_feasible(targets, k):
            return k
    return None
