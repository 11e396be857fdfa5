"""Solver-agnostic MILP models, LP-format export and an external-solver bridge.

Coefficients are exact rationals.  Models are built with
:class:`ModelBuilder` and frozen into :class:`MilpModel`; the objective
constant is kept outside the coefficient matrix (``offset``).
"""

from __future__ import annotations

import os
import re
import shlex
import subprocess
import tempfile
from collections import namedtuple
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from pathlib import Path
from typing import Sequence

from .errors import InputError, SolutionParseError, SolverLaunchError, check_cap
from .poly import BooleanFn, LinearizationCertificate, SignedProduct, as_fraction, format_rational, mask_to_point

NOGOOD_ARITY_CAP = 12

CONTINUOUS, BINARY, INTEGER = "continuous", "binary", "integer"
SENSES = ("<=", ">=", "=")
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class VarDef:
    name: str
    lower: Fraction | None = Fraction(0)  # None is -inf
    upper: Fraction | None = None  # None is +inf
    kind: str = CONTINUOUS

    def __post_init__(self):
        if not _NAME.match(self.name) or len(self.name) > 255:
            raise InputError(f"variable name {self.name!r} is not representable in LP format")
        if self.kind not in (CONTINUOUS, BINARY, INTEGER):
            raise InputError(f"unknown integrality {self.kind!r}")
        lo = None if self.lower is None else as_fraction(self.lower)
        hi = None if self.upper is None else as_fraction(self.upper)
        if self.kind == BINARY:
            lo, hi = Fraction(0), Fraction(1)
        if lo is not None and hi is not None and lo > hi:
            raise InputError(f"{self.name}: lower bound {lo} exceeds upper bound {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple  # ((coefficient, variable name), ...) in model variable order
    sense: str
    rhs: Fraction

    def activity(self, values) -> Fraction:
        return sum((c * values[v] for c, v in self.terms), Fraction(0))

    def violation(self, values):
        """How far ``values`` are from satisfying the row (0 when satisfied)."""
        lhs = sum((c * values[v] for c, v in self.terms), 0)
        gap = lhs - self.rhs
        if self.sense == "<=":
            return max(gap, 0)
        if self.sense == ">=":
            return max(-gap, 0)
        return abs(gap)

    def is_satisfied(self, values, tol=0) -> bool:
        return self.violation(values) <= tol

    def __str__(self):
        return f"{self.name}: {_linear_text(self.terms, exact=True)} {self.sense} {format_rational(self.rhs)}"


ModelStats = namedtuple("ModelStats", "vars cons nonzeros")


@dataclass(frozen=True)
class MilpModel:
    """A minimization model.  Immutable; build it with :class:`ModelBuilder`."""

    name: str
    variables: tuple
    constraints: tuple
    objective: tuple = ()  # ((coefficient, variable name), ...)
    offset: Fraction = Fraction(0)
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {v.name: i for i, v in enumerate(self.variables)})

    @property
    def sense(self):
        return "minimize"

    def var(self, name) -> VarDef:
        return self.variables[self._index[name]]

    def var_names(self):
        return [v.name for v in self.variables]

    def objective_value(self, values):
        return self.offset + sum((c * values[v] for c, v in self.objective), Fraction(0))

    def is_feasible(self, values, tol=0) -> bool:
        for v in self.variables:
            x = values[v.name]
            if v.lower is not None and x < v.lower - tol:
                return False
            if v.upper is not None and x > v.upper + tol:
                return False
        return all(c.is_satisfied(values, tol) for c in self.constraints)

    def stats(self) -> ModelStats:
        return model_stats(self)


def model_stats(model: MilpModel) -> ModelStats:
    """(variables, constraint rows, nonzeros); nonzeros count the constraint
    matrix plus the objective row."""
    nz = sum(len(c.terms) for c in model.constraints) + len(model.objective)
    return ModelStats(len(model.variables), len(model.constraints), nz)


class ModelBuilder:
    """Accumulates variables and rows, then freezes them into a MilpModel.

    Row terms may mention a variable several times; they are merged and put
    in declaration order.  Constant terms are given as ``(value, None)`` and
    moved to the right-hand side.
    """

    def __init__(self, name="model"):
        self.name = name
        self._vars: list[VarDef] = []
        self._index: dict[str, int] = {}
        self._cons: list[Constraint] = []
        self._con_names: set[str] = set()
        self._objective: tuple = ()
        self._offset = Fraction(0)

    def add_var(self, name, lower=Fraction(0), upper=None, kind=CONTINUOUS) -> str:
        if name in self._index:
            raise InputError(f"duplicate variable {name!r}")
        self._index[name] = len(self._vars)
        self._vars.append(VarDef(name, lower, upper, kind))
        return name

    def add_binary(self, name) -> str:
        return self.add_var(name, 0, 1, BINARY)

    def _normalize(self, terms):
        acc: dict[str, Fraction] = {}
        const = Fraction(0)
        index = self._index
        for coeff, var in terms:
            coeff = as_fraction(coeff)
            if var is None:
                const += coeff
            elif var not in index:
                raise InputError(f"undeclared variable {var!r}")
            elif var in acc:
                acc[var] += coeff
            else:
                acc[var] = coeff
        ordered = tuple((c, v) for v, c in sorted(acc.items(), key=lambda t: index[t[0]]) if c)
        return ordered, const

    def add_constraint(self, name, terms, sense, rhs=0) -> Constraint:
        if sense not in SENSES:
            raise InputError(f"unknown sense {sense!r}")
        if name in self._con_names:
            raise InputError(f"duplicate constraint name {name!r}")
        if not _NAME.match(name):
            raise InputError(f"constraint name {name!r} is not representable in LP format")
        ordered, const = self._normalize(terms)
        con = Constraint(name, ordered, sense, as_fraction(rhs) - const)
        self._con_names.add(name)
        self._cons.append(con)
        return con

    def set_objective(self, terms, offset=0):
        ordered, const = self._normalize(terms)
        self._objective = ordered
        self._offset = as_fraction(offset) + const

    def build(self) -> MilpModel:
        return MilpModel(self.name, tuple(self._vars), tuple(self._cons), self._objective, self._offset)


# -- formulations --------------------------------------------------------------


def _split_linear(linear, arity):
    a, beta = linear
    a = tuple(as_fraction(v) for v in a)
    if len(a) != arity:
        raise InputError(f"linear part has {len(a)} coefficients, expected {arity}")
    return a, as_fraction(beta)


def fortet_model(linear, products, arity: int, name="fortet") -> MilpModel:
    """One binary ``f<t>`` per signed product, forced to equal it by

        f_t <= x_i (i in I),  f_t <= 1 - x_j (j in J),
        1 - f_t <= sum_I (1 - x_i) + sum_J x_j.

    Objective: ``a.x + beta + sum_t b_t f_t``.
    """
    a, beta = _split_linear(linear, arity)
    mb = ModelBuilder(name)
    xs = [mb.add_binary(f"x{i}") for i in range(1, arity + 1)]
    obj = [(c, x) for c, x in zip(a, xs)]
    for t, (g, b) in enumerate(products, 1):
        if not isinstance(g, SignedProduct):
            raise InputError(f"Fortet rows need signed products, got {g!r}")
        if g.max_index > arity:
            raise InputError(f"{g} uses a variable beyond arity {arity}")
        y = mb.add_binary(f"f{t}")
        for i in g.positive:
            mb.add_constraint(f"f{t}_le_x{i}", [(1, y), (-1, xs[i - 1])], "<=", 0)
        for j in g.complemented:
            mb.add_constraint(f"f{t}_le_nx{j}", [(1, y), (1, xs[j - 1])], "<=", 1)
        # sum_I x_i - sum_J x_j - f_t <= |I| - 1
        row = [(1, xs[i - 1]) for i in g.positive] + [(-1, xs[j - 1]) for j in g.complemented] + [(-1, y)]
        mb.add_constraint(f"f{t}_ge", row, "<=", len(g.positive) - 1)
        obj.append((b, y))
    mb.set_objective(obj, beta)
    return mb.build()


def certificate_model(cert: LinearizationCertificate, name="fortet") -> MilpModel:
    """Fortet model of a certificate whose functions are all signed products."""
    return fortet_model((cert.a, cert.beta), cert.terms, cert.arity, name=name)


def _nogood_row_terms(xs, point, aux, value):
    """Terms and rhs of ``sum_{pt_j=0} x_j + sum_{pt_j=1} (1 - x_j) + (y or 1-y) >= 1``."""
    ones = sum(point)
    terms = [(-1 if bit else 1, x) for bit, x in zip(point, xs)]
    if value:
        terms.append((1, aux))
        rhs = 1 - ones
    else:
        terms.append((-1, aux))
        rhs = -ones
    return terms, rhs


def add_nogood_rows(mb: ModelBuilder, xs, g: BooleanFn, aux: str, prefix: str):
    """All 2^n rows forcing ``aux = g(x)``, one per vertex in mask order."""
    n = len(xs)
    for mask in range(1 << n):
        point = mask_to_point(mask, n)
        terms, rhs = _nogood_row_terms(xs, point, aux, g.at_mask(mask))
        mb.add_constraint(f"{prefix}_v{mask}", terms, ">=", rhs)


def nogood_model(fns: Sequence[BooleanFn], linear, arity: int, weights=None,
                 cap: int = NOGOOD_ARITY_CAP, name="nogood") -> MilpModel:
    """Binary ``y<i>`` per function with the full no-good description.

    Objective ``a.x + beta + sum_i b_i y_i`` (``weights`` default to 1).
    """
    check_cap("arity", arity, cap)
    a, beta = _split_linear(linear, arity)
    weights = [1] * len(fns) if weights is None else list(weights)
    if len(weights) != len(fns):
        raise InputError("one weight per function expected")
    mb = ModelBuilder(name)
    xs = [mb.add_binary(f"x{i}") for i in range(1, arity + 1)]
    obj = [(c, x) for c, x in zip(a, xs)]
    for i, (g, b) in enumerate(zip(fns, weights), 1):
        if g.arity != arity:
            raise InputError(f"function {i} has arity {g.arity}, expected {arity}")
        y = mb.add_binary(f"y{i}")
        add_nogood_rows(mb, xs, g, y, f"ng{i}")
        obj.append((b, y))
    mb.set_objective(obj, beta)
    return mb.build()


def separate_nogood(g: BooleanFn, y_value, x_hat: Sequence, tol=1e-9, aux="y"):
    """Most violated no-good row among the nearest vertex and its n neighbours.

    ``x_hat`` is rounded coordinatewise (0.5 rounds up) to the vertex
    ``v0``; rows for ``v0`` and each single-coordinate flip of it are tested,
    so ``g`` is evaluated at most n + 1 times.  Returns a :class:`Constraint`
    in the variables ``x1..xn`` and ``aux``, or None if none of those rows is
    violated by more than ``tol``.
    """
    n = len(x_hat)
    if n != g.arity:
        raise InputError(f"point has {n} coordinates, function arity is {g.arity}")
    for v in list(x_hat) + [y_value]:
        if not 0 <= v <= 1:
            raise InputError(f"fractional point coordinates must lie in [0, 1], got {v!r}")
    v0 = [1 if v >= Fraction(1, 2) else 0 for v in x_hat]
    xs = [f"x{i}" for i in range(1, n + 1)]
    values = dict(zip(xs, x_hat))
    values[aux] = y_value
    best, best_violation = None, tol
    for j in range(n + 1):
        vertex = list(v0)
        if j:
            vertex[j - 1] ^= 1
        mask = sum(bit << i for i, bit in enumerate(vertex))
        terms, rhs = _nogood_row_terms(xs, vertex, aux, g.at_mask(mask))
        row = Constraint(f"nogood_v{mask}", tuple((Fraction(c), v) for c, v in terms), ">=", Fraction(rhs))
        violation = row.violation(values)
        if violation > best_violation:
            best, best_violation = row, violation
    return best


# -- LP format -------------------------------------------------------------------


def _is_terminating(q: Fraction) -> bool:
    d = q.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return d == 1


def format_decimal(q: Fraction) -> str:
    """Exact decimal rendering of a rational with a terminating expansion."""
    q = as_fraction(q)
    if not _is_terminating(q):
        raise InputError(f"{q} has no terminating decimal expansion")
    if q.denominator == 1:
        return str(q.numerator)
    digits = 0
    scaled = q
    while scaled.denominator != 1:
        scaled *= 10
        digits += 1
    n = abs(scaled.numerator)
    s = str(n).rjust(digits + 1, "0")
    text = f"{s[:-digits]}.{s[-digits:]}"
    return ("-" if q < 0 else "") + text


def _linear_text(terms, exact=False):
    fmt = format_rational if exact else format_decimal
    parts = []
    for c, v in terms:
        mag = fmt(abs(c))
        if not parts:
            parts.append(f"{'-' if c < 0 else ''}{mag} {v}")
        else:
            parts.append(f"{'-' if c < 0 else '+'} {mag} {v}")
    return " ".join(parts) if parts else "0"


def _row_scale(coefficients):
    """1 when every coefficient has a terminating decimal, else the lcm of denominators."""
    if all(_is_terminating(c) for c in coefficients):
        return 1
    return lcm(*(c.denominator for c in coefficients))


def _wrap(head, body, width=240):
    words = body.split(" ")
    lines, cur = [], head
    for w in words:
        if len(cur) + 1 + len(w) > width and cur.strip():
            lines.append(cur)
            cur = "   " + w
        else:
            cur = f"{cur} {w}" if cur else w
    lines.append(cur)
    return lines


def write_lp(model: MilpModel, destination=None, relax: bool = False) -> str:
    """Deterministic CPLEX-LP text for ``model``.

    Coefficients are written as exact decimals.  A row containing a rational
    without terminating decimal expansion is multiplied through by the lcm of
    its denominators (noted in a comment); the objective is scaled the same
    way and the factor recorded in ``\\ objective scale: K``.  The constant
    offset appears only in the ``\\ objective offset:`` comment.  With
    ``relax`` the integrality sections are dropped and binaries become
    [0, 1] bounds.  If ``destination`` is given the text is also written there.
    """
    lines = [f"\\ model: {model.name}", f"\\ objective offset: {format_rational(model.offset)}"]
    obj_scale = _row_scale([c for c, _ in model.objective])
    if obj_scale != 1:
        lines.append(f"\\ objective scale: {obj_scale}")
    lines.append("Minimize")
    obj_terms = [(c * obj_scale, v) for c, v in model.objective]
    if not obj_terms and model.variables:
        obj_terms = [(Fraction(0), model.variables[0].name)]
    lines += _wrap(" obj:", _linear_text(obj_terms))
    lines.append("Subject To")
    op = {"<=": "<=", ">=": ">=", "=": "="}
    for con in model.constraints:
        scale = _row_scale([c for c, _ in con.terms] + [con.rhs])
        if scale != 1:
            lines.append(f"\\ {con.name} scaled by {scale}")
        terms = [(c * scale, v) for c, v in con.terms]
        if not terms and model.variables:
            terms = [(Fraction(0), model.variables[0].name)]
        body = f"{_linear_text(terms)} {op[con.sense]} {format_decimal(con.rhs * scale)}"
        lines += _wrap(f" {con.name}:", body)
    lines.append("Bounds")
    for v in model.variables:
        if v.kind == BINARY and not relax:
            continue
        lo = "-inf" if v.lower is None else _bound_text(v, v.lower)
        hi = "+inf" if v.upper is None else _bound_text(v, v.upper)
        if v.lower is not None and v.upper is not None and v.lower == v.upper:
            lines.append(f" {v.name} = {lo}")
        else:
            lines.append(f" {lo} <= {v.name} <= {hi}")
    if not relax:
        binaries = [v.name for v in model.variables if v.kind == BINARY]
        generals = [v.name for v in model.variables if v.kind == INTEGER]
        if generals:
            lines.append("General")
            lines += _wrap("", " ".join(generals))
        lines.append("Binary")
        if binaries:
            lines += _wrap("", " ".join(binaries))
    lines.append("End")
    text = "\n".join(lines) + "\n"
    if destination is not None:
        Path(destination).write_text(text)
    return text


def _bound_text(v, value):
    try:
        return format_decimal(value)
    except InputError:
        raise InputError(f"bound {value} of {v.name} has no exact decimal form") from None


def lp_header_values(text: str):
    """Read back the offset and objective scale comments of an LP file."""
    offset, scale = Fraction(0), 1
    for line in text.splitlines():
        if line.startswith("\\ objective offset:"):
            offset = Fraction(line.split(":", 1)[1].strip())
        elif line.startswith("\\ objective scale:"):
            scale = int(line.split(":", 1)[1])
        elif not line.startswith("\\"):
            break
    return offset, scale


# -- external solver bridge ---------------------------------------------------------

SOLVER_ENV = "PBFLIN_SOLVER_COMMAND"
SOLVER_MODE_ENV = "PBFLIN_SOLVER_MODE"
LP_RELAXATION, INTEGER_MODE = "lp_relaxation", "integer"


@dataclass(frozen=True)
class SolverBridgeConfig:
    """Command template with ``{model}`` and ``{solution}`` placeholders."""

    command: str
    mode: str = LP_RELAXATION
    timeout: float | None = None

    def __post_init__(self):
        if not self.command or not self.command.strip():
            raise InputError("solver command template is empty")
        if "{model}" not in self.command or "{solution}" not in self.command:
            raise InputError("solver command needs {model} and {solution} placeholders")
        if self.mode not in (LP_RELAXATION, INTEGER_MODE):
            raise InputError(f"unknown solver mode {self.mode!r}")

    @classmethod
    def from_mapping(cls, mapping, env=None):
        """Build from ``key=value`` settings; the environment overrides them."""
        env = os.environ if env is None else env
        command = env.get(SOLVER_ENV) or mapping.get("solver_command")
        if not command:
            return None
        mode = env.get(SOLVER_MODE_ENV) or mapping.get("solver_mode") or LP_RELAXATION
        return cls(command, mode)


def read_config_file(path) -> dict:
    """Simple ``key=value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


@dataclass(frozen=True)
class SolveResult:
    status: str
    objective: float | None
    values: dict | None


def parse_solution(text: str):
    """``<name> <value>`` lines, ``#`` comments, optional ``=obj= <value>``
    and ``=status= <word>`` lines."""
    values, objective, status = {}, None, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionParseError(f"solution line {lineno}: expected '<name> <value>', got {raw!r}")
        key, value = parts
        if key == "=status=":
            status = value
            continue
        try:
            number = float(value)
        except ValueError:
            raise SolutionParseError(f"solution line {lineno}: bad number {value!r}") from None
        if key == "=obj=":
            objective = number
        else:
            values[key] = number
    return status, objective, values


def solve_external(model: MilpModel, config: SolverBridgeConfig, workdir=None) -> SolveResult:
    """Write ``model`` as LP, run the configured command, read its solution.

    The returned objective includes the model's constant offset.
    """
    relax = config.mode == LP_RELAXATION
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        model_path = Path(tmp) / "model.lp"
        sol_path = Path(tmp) / "model.sol"
        text = write_lp(model, model_path, relax=relax)
        _, scale = lp_header_values(text)
        argv = [tok.replace("{model}", str(model_path)).replace("{solution}", str(sol_path))
                for tok in shlex.split(config.command)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=config.timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise SolverLaunchError(f"could not run solver {argv[0]!r}: {exc}") from exc
        if proc.returncode != 0:
            raise SolverLaunchError(f"solver exited with status {proc.returncode}: {proc.stderr.strip()[:500]}")
        if not sol_path.exists():
            raise SolutionParseError("solver produced no solution file")
        status, objective, values = parse_solution(sol_path.read_text())
    status = status or "optimal"
    if status != "optimal":
        return SolveResult(status, None, None)
    unknown = set(values) - set(model.var_names())
    if unknown:
        raise SolutionParseError(f"solution mentions unknown variables: {sorted(unknown)[:5]}")
    if objective is None:
        objective = float(model.offset) + sum(float(c) * values.get(v, 0.0) for c, v in model.objective)
    else:
        objective = objective / scale + float(model.offset)
    return SolveResult(status, objective, values)
