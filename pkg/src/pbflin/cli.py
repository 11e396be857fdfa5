"""Command-line interface: ``pbflin <command> ...``.

Exit codes: 0 success, 2 bad input, 3 cap exceeded, 4 solver bridge failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import random
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import complexity, labs, milp, poly
from .errors import CapExceededError, InputError, PbfError, check_cap

# name -> (hard maximum, description)
CAPS = {
    "enumeration": (poly.ENUMERATION_CAP, "arity for 2^n sweeps"),
    "lc_c_arity": (complexity.LC_C_ARITY_CAP, "arity for the signed-product search"),
    "lc_b_arity": (complexity.LC_B_ARITY_CAP, "arity for the Boolean search"),
    "cover_targets": (complexity.COVER_TARGET_CAP, "distinct targets in a pss cover"),
    "cover_k": (complexity.COVER_K_CAP, "dimension of a pss cover"),
    "nogood_arity": (milp.NOGOOD_ARITY_CAP, "arity of no-good models"),
    "labs_expand": (labs.EXPAND_CAP, "N for the expansion and the standard model"),
    "labs_indicator_only": (labs.INDICATOR_ONLY_CAP, "N for the indicator-only model"),
    "labs_exhaustive": (labs.EXHAUSTIVE_CAP, "N for exhaustive search"),
}


@dataclass
class CliConfig:
    bridge: milp.SolverBridgeConfig | None = None
    caps: dict = field(default_factory=lambda: {k: v for k, (v, _) in CAPS.items()})
    csv: bool = False
    seed: int = 0
    workers: int = 1

    def cap(self, name):
        return self.caps[name]

    def set_cap(self, name, value, unsafe=False):
        if name not in CAPS:
            raise InputError(f"unknown cap {name!r}; known: {', '.join(CAPS)}")
        try:
            value = int(value)
        except ValueError:
            raise InputError(f"cap {name} needs an integer, got {value!r}") from None
        if value < 0:
            raise InputError(f"cap {name} must be nonnegative")
        if value > CAPS[name][0] and not unsafe:
            raise InputError(f"cap {name}={value} exceeds the built-in maximum {CAPS[name][0]} "
                             "(pass --unsafe-caps to allow)")
        self.caps[name] = value


def build_config(args, env=None) -> CliConfig:
    settings = milp.read_config_file(args.config) if args.config else {}
    cfg = CliConfig(csv=args.csv, seed=args.seed, workers=args.workers)
    if args.workers < 1:
        raise InputError("--workers must be at least 1")
    for key, value in settings.items():
        if key.startswith("cap."):
            cfg.set_cap(key[4:], value, args.unsafe_caps)
    for item in args.cap or ():
        if "=" not in item:
            raise InputError(f"--cap expects NAME=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        cfg.set_cap(name.strip(), value.strip(), args.unsafe_caps)
    cfg.bridge = milp.SolverBridgeConfig.from_mapping(settings, env)
    return cfg


# -- input files ----------------------------------------------------------------


def _read(path) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def _header_and_body(text, what):
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].replace(" ", "").startswith("n="):
        raise InputError(f"{what} file must start with a line 'n=<arity>'")
    try:
        n = int(lines[0].replace(" ", "")[2:])
    except ValueError:
        raise InputError(f"bad header line {lines[0]!r}") from None
    if n < 1:
        raise InputError("arity must be positive")
    return n, lines[1:]


def read_truth_tables(text, cap=None):
    """``n=<arity>`` then one 0/1 string of length 2^n per function (mask order:
    bit i-1 of the index is x_i)."""
    n, body = _header_and_body(text, "truth-table")
    if cap is not None:
        check_cap("arity", n, cap)
    tables = [poly.BooleanFn.from_table(n, "".join(ln.split()), name=f"g{i}") for i, ln in enumerate(body, 1)]
    if not tables:
        raise InputError("truth-table file lists no functions")
    return n, tables


def read_values(text, cap):
    """``n=<arity>`` then 2^n rationals in mask order."""
    n, body = _header_and_body(text, "value")
    check_cap("arity", n, cap)
    tokens = " ".join(body).replace(",", " ").split()
    if len(tokens) != 1 << n:
        raise InputError(f"expected {1 << n} values, got {len(tokens)}")
    try:
        return n, [Fraction(t) for t in tokens]
    except (ValueError, ZeroDivisionError):
        raise InputError("values must be integers, decimals or p/q") from None


def _parse_number(text):
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise InputError(f"not a number: {text!r}") from None


def parse_point(text):
    parts = [p for p in text.replace(",", " ").split()]
    if not parts:
        raise InputError("empty point")
    return [_parse_number(p) for p in parts]


def _labs_n(n, cfg, cap_name=None):
    if n < 3:
        raise InputError(f"N must be at least 3, got {n}")
    if cap_name:
        check_cap("N", n, cfg.cap(cap_name))
    return n


def _input_poly(args, cfg):
    sources = [s for s in (args.input, args.labs, getattr(args, "values", None)) if s is not None]
    if len(sources) != 1:
        raise InputError("give exactly one of INPUT, --labs N" + (", --values FILE" if hasattr(args, "values") else ""))
    if args.labs is not None:
        n = _labs_n(args.labs, cfg, "labs_expand")
        return labs.f_bern_poly(n, cfg.cap("labs_expand"))
    if getattr(args, "values", None) is not None:
        n, values = read_values(_read(args.values), cfg.cap("enumeration"))
        return poly.interpolate(n, values, cfg.cap("enumeration"))
    return poly.parse_poly(_read(args.input))


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _yes(flag):
    return "yes" if flag else "no"


# -- commands -----------------------------------------------------------------------


def cmd_expand(args, cfg, out):
    out.write(poly.format_poly(_input_poly(args, cfg)))


def _random_poly(n, seed):
    rng = random.Random(seed)
    values = [Fraction(rng.randint(-10**6, 10**6), rng.randint(1, 10**3)) for _ in range(1 << n)]
    return poly.interpolate(n, values)


def cmd_lc(args, cfg, out):
    if args.random is not None:
        if args.input is not None or args.labs is not None:
            raise InputError("--random replaces INPUT and --labs")
        check_cap("arity", args.random, cfg.cap("enumeration"))
        p = _random_poly(args.random, cfg.seed)
    else:
        p = _input_poly(args, cfg)
    n = p.arity
    check_cap("arity", n, cfg.cap("enumeration"))
    family = args.family
    lower = None
    if family == "M":
        cert = complexity.monomial_certificate(p)
        exact = True
    elif family == "C":
        budget = complexity.LcSearchBudget(args.max_degree, args.max_support, args.time_limit)
        res = complexity.lc_signed_products_exact(p, budget, arity_cap=cfg.cap("lc_c_arity"))
        cert, exact, lower = res.certificate, res.exact, res.lower_bound
    else:
        res = complexity.lc_boolean(p, n, time_limit=args.time_limit, arity_cap=cfg.cap("lc_b_arity"),
                                    k_cap=cfg.cap("cover_k"), target_cap=cfg.cap("cover_targets"))
        cert, exact, lower = res.certificate, res.exact, res.lower_bound
    lower = cert.size if lower is None else lower
    verified = poly.verify_certificate(p, n, cert, cfg.cap("enumeration"))
    if cfg.csv:
        out.write(_csv(("family", "arity", "k", "exact", "lower_bound", "verified"),
                       [(family, n, cert.size, _yes(exact), lower, _yes(verified))]))
    else:
        out.write(f"family={family} arity={n}\n")
        out.write(f"k={cert.size}{'' if exact else ' (upper bound)'}\n")
        out.write(f"lower_bound={lower}\n")
        out.write(f"verified={_yes(verified)}\n")
        out.write(complexity.format_certificate(cert))
    if not verified:
        raise PbfError("certificate failed verification")


def _build_model(args, cfg):
    kind = args.kind
    if kind in ("standard", "indicator-only", "value-indicator"):
        try:
            n = int(args.target)
        except (TypeError, ValueError):
            raise InputError(f"model {kind} expects N, got {args.target!r}") from None
        if kind == "standard":
            _labs_n(n, cfg, "labs_expand")
            return labs.standard_ip(n, cfg.cap("labs_expand")), n
        if kind == "indicator-only":
            _labs_n(n, cfg, "labs_indicator_only")
            return labs.indicator_only_ip(n, cfg.cap("labs_indicator_only")), n
        _labs_n(n, cfg)
        inst = labs.LabsInstance.compat(n) if args.compat else labs.LabsInstance(n, args.ld_mode, args.pair_vars)
        return inst.value_indicator_ip(), n
    if args.target is None:
        raise InputError(f"model {kind} expects an input file")
    text = _read(args.target)
    if kind == "fortet":
        if args.certificate:
            cert = complexity.parse_certificate(_read(args.certificate))
            return milp.certificate_model(cert), cert.arity
        p = poly.parse_poly(text)
        cert = complexity.monomial_certificate(p)
        return milp.certificate_model(cert), p.arity
    n, fns = read_truth_tables(text, cfg.cap("nogood_arity"))
    return milp.nogood_model(fns, ((0,) * n, 0), n, cap=cfg.cap("nogood_arity")), n


def cmd_model(args, cfg, out):
    model, n = _build_model(args, cfg)
    stats = milp.model_stats(model)
    if args.write_lp == "-":
        out.write(milp.write_lp(model, relax=args.relax))
        return
    if args.write_lp:
        milp.write_lp(model, args.write_lp, relax=args.relax)
    bound = None
    if args.solve:
        if cfg.bridge is None:
            raise InputError(f"--solve needs a solver command ({milp.SOLVER_ENV} or solver_command in --config)")
        res = milp.solve_external(model, cfg.bridge)
        bound = res.objective if res.objective is not None else res.status
    if cfg.csv:
        out.write(_csv(("kind", "n", "vars", "cons", "nonzeros", "bound"),
                       [(args.kind, n, *stats, "" if bound is None else bound)]))
    else:
        line = f"vars={stats.vars} cons={stats.cons} nonzeros={stats.nonzeros}"
        if bound is not None:
            line += f" bound={bound}"
        out.write(line + "\n")


def _parse_range(text):
    for sep in ("..", "-", ":"):
        if sep in text:
            lo, hi = text.split(sep, 1)
            break
    else:
        lo = hi = text
    try:
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise InputError(f"expected N or N1..N2, got {text!r}") from None
    if lo > hi:
        raise InputError(f"empty range {text!r}")
    return range(lo, hi + 1)


def cmd_labs(args, cfg, out):
    if args.action == "energy":
        out.write(f"energy={labs.energy(labs.parse_spins(args.value))}\n")
        return
    if args.action == "solve":
        try:
            n = int(args.value)
        except ValueError:
            raise InputError(f"labs solve expects N, got {args.value!r}") from None
        if n < 1:
            raise InputError("N must be positive")
        res = labs.exhaustive_solve(n, workers=cfg.workers, cap=cfg.cap("labs_exhaustive"))
        witness = labs.format_spins(res.witness)
        if cfg.csv:
            out.write(_csv(("N", "opt", "witness", "points"), [(n, res.optimum, witness, res.points)]))
        else:
            out.write(f"N={n} opt={res.optimum} witness={witness} points={res.points}\n")
        return
    ns = _parse_range(args.value)
    for n in ns:
        _labs_n(n, cfg)
    rows = labs.table_harness(ns, opt_cap=min(args.opt_max, cfg.cap("labs_exhaustive")),
                              std_cap=cfg.cap("labs_expand"), compat=not args.displayed,
                              bridge=cfg.bridge if args.bounds else None, workers=cfg.workers,
                              timing=args.timing)
    out.write(labs.format_csv(rows) if cfg.csv else labs.format_table(rows))


def cmd_separate(args, cfg, out):
    n, fns = read_truth_tables(_read(args.table), cfg.cap("enumeration"))
    if len(fns) != 1:
        raise InputError("separate expects exactly one function in the truth-table file")
    x_hat = parse_point(args.point)
    if len(x_hat) != n:
        raise InputError(f"point has {len(x_hat)} coordinates, expected {n}")
    row = milp.separate_nogood(fns[0], _parse_number(args.y), x_hat)
    if row is None:
        out.write("none\n")
        return
    values = dict(zip((f"x{i}" for i in range(1, n + 1)), x_hat), y=_parse_number(args.y))
    out.write(f"{row}\n")
    out.write(f"violation={poly.format_rational(row.violation(values))}\n")


# -- parser ------------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--csv", action="store_true", help="machine-readable CSV output")
    common.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized commands (default 0)")
    common.add_argument("--config", help="key=value file: solver_command, solver_mode, cap.<name>")
    common.add_argument("--cap", action="append", metavar="NAME=VALUE",
                        help="lower an enumeration cap; names: " + ", ".join(CAPS))
    common.add_argument("--unsafe-caps", action="store_true", help="allow caps above the built-in maxima")

    parser = argparse.ArgumentParser(prog="pbflin", description="Linearization complexity of pseudo-Boolean "
                                     "functions and LABS integer programs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("expand", parents=[common], help="print a polynomial in canonical form")
    p.add_argument("input", nargs="?", help="polynomial file ('-' for stdin)")
    p.add_argument("--labs", type=int, metavar="N", help="expand the LABS energy for length N")
    p.add_argument("--values", metavar="FILE", help="interpolate a value table (n=<arity>, then 2^n values)")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("lc", parents=[common], help="linearization complexity with a verified certificate")
    p.add_argument("input", nargs="?", help="polynomial file ('-' for stdin)")
    p.add_argument("--labs", type=int, metavar="N", help="use the LABS energy for length N")
    p.add_argument("--random", type=int, metavar="N", help="random rational function of arity N (uses --seed)")
    p.add_argument("--family", choices=("M", "C", "B"), default="C")
    p.add_argument("--max-degree", type=int, help="largest signed-product degree for family C")
    p.add_argument("--max-support", type=int, help="largest support size tried for family C")
    p.add_argument("--time-limit", type=float, default=60.0, help="seconds (default 60)")
    p.set_defaults(func=cmd_lc)

    p = sub.add_parser("model", parents=[common], help="build an IP model and print its size")
    p.add_argument("kind", choices=("standard", "indicator-only", "value-indicator", "fortet", "nogood"))
    p.add_argument("target", nargs="?", help="N for LABS models; polynomial or truth-table file otherwise")
    p.add_argument("--compat", action="store_true", help="value-indicator counting as in the published table")
    p.add_argument("--ld-mode", choices=(labs.PARITY, labs.FULL_RANGE), default=labs.PARITY)
    p.add_argument("--pair-vars", choices=(labs.UPPER_TRIANGLE, labs.ORDERED_COMPAT), default=labs.UPPER_TRIANGLE)
    p.add_argument("--certificate", help="fortet: build from a certificate file instead of monomials")
    p.add_argument("--write-lp", metavar="PATH", help="write the model in LP format ('-' prints it)")
    p.add_argument("--relax", action="store_true", help="drop integrality in the LP file")
    p.add_argument("--solve", action="store_true", help="solve through the configured external solver")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("labs", parents=[common], help="LABS: exhaustive optimum, energy, comparison table")
    p.add_argument("action", choices=("solve", "energy", "table"))
    p.add_argument("value", help="N, a +/- sequence, or a range N1..N2")
    p.add_argument("--opt-max", type=int, default=20, help="table: largest N solved exhaustively (default 20)")
    p.add_argument("--displayed", action="store_true", help="table: count the displayed model, not the compat one")
    p.add_argument("--bounds", action="store_true", help="table: LP bounds through the solver bridge")
    p.add_argument("--timing", action="store_true", help="table: fill time_s (output no longer reproducible)")
    p.set_defaults(func=cmd_labs)

    p = sub.add_parser("separate", parents=[common], help="no-good separation at a fractional point")
    p.add_argument("table", help="truth-table file with one function")
    p.add_argument("--point", required=True, help="x-hat, comma separated")
    p.add_argument("--y", required=True, help="value of the auxiliary variable")
    p.set_defaults(func=cmd_separate)
    return parser


def main(argv=None, out=None, env=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args, env)
        args.func(args, cfg, out)
    except CapExceededError as exc:
        print(f"pbflin: cap exceeded: {exc}", file=sys.stderr)
        return exc.exit_code
    except PbfError as exc:
        print(f"pbflin: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
