import random
import sys
from fractions import Fraction
from itertools import product
from pathlib import Path

import pytest

from oracles import completions, objective, unique_completion
from pbflin import highs_runner
from pbflin.errors import CapExceededError, InputError, SolutionParseError, SolverLaunchError
from pbflin.labs import standard_ip, value_indicator_ip
from pbflin.milp import (
    BINARY,
    ModelBuilder,
    SolverBridgeConfig,
    VarDef,
    certificate_model,
    format_decimal,
    fortet_model,
    model_stats,
    nogood_model,
    parse_solution,
    read_config_file,
    separate_nogood,
    solve_external,
    write_lp,
)
from pbflin.poly import BooleanFn, LinearizationCertificate, SignedProduct, mask_to_point

GOLDEN = Path(__file__).parent / "golden"
needs_highs = pytest.mark.skipif(not highs_runner.available(), reason="highspy not installed")


def tiny_model():
    mb = ModelBuilder("tiny")
    x = mb.add_var("x1")
    mb.add_constraint("c1", [(1, x)], ">=", Fraction(1, 2))
    mb.set_objective([(1, x)])
    return mb.build()


def and_fn(n=2):
    return BooleanFn(n, lambda x: int(all(x)), name="and")


def highs_config(mode="lp_relaxation"):
    return SolverBridgeConfig(highs_runner.bridge_command(), mode)


class TestBuilder:
    def test_empty_model(self):
        assert model_stats(ModelBuilder().build()) == (0, 0, 0)

    def test_duplicate_names(self):
        mb = ModelBuilder()
        mb.add_binary("x1")
        with pytest.raises(InputError):
            mb.add_binary("x1")

    def test_bad_name(self):
        with pytest.raises(InputError):
            VarDef("x-1")

    def test_binary_bounds(self):
        v = VarDef("y", kind=BINARY)
        assert (v.lower, v.upper) == (0, 1)

    def test_undeclared_variable(self):
        mb = ModelBuilder()
        with pytest.raises(InputError):
            mb.add_constraint("c", [(1, "x9")], "<=", 1)

    def test_terms_merged_in_declaration_order(self):
        mb = ModelBuilder()
        a, b = mb.add_binary("a"), mb.add_binary("b")
        con = mb.add_constraint("c", [(1, b), (2, a), (3, b), (4, None)], "<=", 10)
        assert con.terms == ((2, "a"), (4, "b")) and con.rhs == 6


class TestFortet:
    def test_single_product_counts(self):
        m = fortet_model(((0, 0), 0), [(SignedProduct((1, 2), ()), 1)], 2)
        assert model_stats(m) == (3, 3, 8)

    def test_worked_example_counts(self):
        cert = LinearizationCertificate((1, 1, 1), -1, ((SignedProduct((), (1, 2, 3)), 1),))
        m = certificate_model(cert)
        assert model_stats(m)[:2] == (4, 4)

    def test_no_products(self):
        m = fortet_model(((1,), 0), [], 1)
        assert model_stats(m)[:2] == (1, 0)

    def test_overlap_rejected(self):
        with pytest.raises(InputError):
            fortet_model(((0, 0), 0), [(SignedProduct((1,), (1,)), 1)], 2)

    def test_product_beyond_arity(self):
        with pytest.raises(InputError):
            fortet_model(((0, 0), 0), [(SignedProduct((1, 3), ()), 1)], 2)

    @pytest.mark.parametrize("seed", range(4))
    def test_unique_completion_is_the_product(self, seed):
        rng = random.Random(seed)
        n = rng.randint(2, 4)
        products = []
        for _ in range(rng.randint(1, 3)):
            support = rng.sample(range(1, n + 1), rng.randint(1, n))
            cut = rng.randint(0, len(support))
            products.append((SignedProduct(tuple(support[:cut]), tuple(support[cut:])), rng.randint(-3, 3) or 1))
        m = fortet_model(((0,) * n, 0), products, n)
        for x in product((0, 1), repeat=n):
            fixed = {f"x{i}": b for i, b in enumerate(x, 1)}
            values = unique_completion(m, fixed)
            assert values is not None
            for t, (g, b) in enumerate(products, 1):
                assert values[f"f{t}"] == g.holds_at_mask(sum(bit << i for i, bit in enumerate(x)))
            assert m.is_feasible(values)


class TestNogood:
    def test_identity_rows(self):
        m = nogood_model([BooleanFn(1, lambda x: x[0])], ((0,), 0), 1)
        rows = {c.name: c for c in m.constraints}
        # vertex 0: g = 0, so x1 + (1 - y) >= 1;  vertex 1: g = 1, so (1 - x1) + y >= 1
        assert [(c.terms, c.sense, c.rhs) for c in rows.values()] == [
            (((1, "x1"), (-1, "y1")), ">=", 0),
            (((-1, "x1"), (1, "y1")), ">=", 0),
        ]

    def test_two_variable_counts(self):
        m = nogood_model([and_fn()], ((0, 0), 0), 2)
        assert model_stats(m)[:2] == (3, 4)

    def test_cap(self):
        with pytest.raises(CapExceededError):
            nogood_model([BooleanFn(13, lambda x: 0)], ((0,) * 13, 0), 13)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_exhaustive_semantics(self, n):
        rng = random.Random(n)
        fns = [BooleanFn.from_table(n, [rng.randint(0, 1) for _ in range(1 << n)]) for _ in range(2)]
        m = nogood_model(fns, ((0,) * n, 0), n)
        for mask in range(1 << n):
            x = mask_to_point(mask, n)
            fixed = {f"x{i}": b for i, b in enumerate(x, 1)}
            comps = completions(m, fixed)
            assert all(len(c) == 1 for c in comps)
            values = unique_completion(m, fixed)
            assert [values["y1"], values["y2"]] == [fns[0].at_mask(mask), fns[1].at_mask(mask)]


class TestSeparation:
    def test_and_violated(self):
        row = separate_nogood(and_fn(), Fraction(1, 10), [Fraction(6, 10), Fraction(6, 10)])
        assert row is not None and row.name == "nogood_v3"
        assert row.terms == ((-1, "x1"), (-1, "x2"), (1, "y")) and row.rhs == -1
        assert row.violation({"x1": Fraction(6, 10), "x2": Fraction(6, 10), "y": Fraction(1, 10)}) == Fraction(1, 10)

    def test_consistent_integer_point(self):
        g = and_fn()
        for mask in range(4):
            x = mask_to_point(mask, 2)
            assert separate_nogood(g, g(x), x) is None

    def test_zero_point(self):
        assert separate_nogood(and_fn(), 0, (0, 0)) is None

    def test_near_tie(self):
        assert separate_nogood(and_fn(), 0, (0.5, 0.5)) is None  # row for (1,1) is tight
        row = separate_nogood(and_fn(), 0, (0.5, 0.6))
        assert row is not None and row.name == "nogood_v3"

    def test_bad_point(self):
        with pytest.raises(InputError):
            separate_nogood(and_fn(), 0, (0.5,))
        with pytest.raises(InputError):
            separate_nogood(and_fn(), 0, (1.5, 0))

    def test_literal_contract(self):
        rng = random.Random(2)
        g = BooleanFn(3, lambda x: int(sum(x) % 2))
        m = nogood_model([g], ((0, 0, 0), 0), 3)
        for _ in range(200):
            x_hat = [Fraction(rng.randint(0, 10), 10) for _ in range(3)]
            y = Fraction(rng.randint(0, 10), 10)
            if separate_nogood(g, y, x_hat, aux="y1") is None:
                v0 = [1 if v >= Fraction(1, 2) else 0 for v in x_hat]
                names = {sum(b << i for i, b in enumerate(v0)) ^ (1 << j if j >= 0 else 0)
                         for j in range(-1, 3)}
                values = {"x1": x_hat[0], "x2": x_hat[1], "x3": x_hat[2], "y1": y}
                for con in m.constraints:
                    if int(con.name.split("_v")[1]) in names:
                        assert con.is_satisfied(values)


class TestLpFormat:
    @pytest.mark.parametrize("q,text", [(Fraction(1, 2), "0.5"), (Fraction(-3), "-3"), (Fraction(1, 8), "0.125")])
    def test_decimals(self, q, text):
        assert format_decimal(q) == text

    def test_non_terminating(self):
        with pytest.raises(InputError):
            format_decimal(Fraction(1, 3))

    def test_golden_tiny(self):
        assert write_lp(tiny_model()) == (GOLDEN / "tiny.lp").read_text()

    def test_golden_value_indicator(self):
        assert write_lp(value_indicator_ip(3)) == (GOLDEN / "value_indicator_3.lp").read_text()

    def test_empty_constraints(self):
        mb = ModelBuilder("free")
        mb.add_binary("x1")
        text = write_lp(mb.build())
        assert "Subject To\nBounds\n" in text and text.endswith("End\n")

    def test_scaled_row(self):
        mb = ModelBuilder("third")
        x = mb.add_var("x1", upper=1)
        mb.add_constraint("c", [(Fraction(1, 3), x)], ">=", Fraction(1, 7))
        mb.set_objective([(Fraction(1, 3), x)], Fraction(1, 7))
        text = write_lp(mb.build())
        assert "\\ c scaled by 21" in text and " c: 7 x1 >= 3" in text
        assert "\\ objective scale: 3" in text and "\\ objective offset: 1/7" in text

    def test_offset_comment(self):
        assert "\\ objective offset: 14" in write_lp(standard_ip(4))

    def test_deterministic(self, tmp_path):
        a = write_lp(standard_ip(5), tmp_path / "a.lp")
        b = write_lp(standard_ip(5))
        assert a == b == (tmp_path / "a.lp").read_text()


class TestSolutionFiles:
    def test_parse(self):
        status, obj, values = parse_solution("# header\n=status= optimal\n=obj= 1.5\nx1 1\nx2 0.5 # note\n")
        assert (status, obj, values) == ("optimal", 1.5, {"x1": 1.0, "x2": 0.5})

    @pytest.mark.parametrize("bad", ["x1", "x1 abc", "x1 1 2"])
    def test_parse_errors(self, bad):
        with pytest.raises(SolutionParseError):
            parse_solution(bad)

    def test_config_file(self, tmp_path):
        path = tmp_path / "pbflin.cfg"
        path.write_text("# solver\nsolver_command = run {model} {solution}\nsolver_mode=integer\n")
        cfg = SolverBridgeConfig.from_mapping(read_config_file(path), env={})
        assert cfg.command == "run {model} {solution}" and cfg.mode == "integer"
        env = {"PBFLIN_SOLVER_COMMAND": "other {model} {solution}"}
        assert SolverBridgeConfig.from_mapping(read_config_file(path), env=env).command.startswith("other")

    def test_config_validation(self):
        with pytest.raises(InputError):
            SolverBridgeConfig("solve {model}")
        with pytest.raises(InputError):
            SolverBridgeConfig("")


def _fake_solver(tmp_path, body):
    script = tmp_path / "fake_solver.py"
    script.write_text("import sys\nmodel, sol = sys.argv[1:]\n" + body)
    return SolverBridgeConfig(f"{sys.executable} {script} {{model}} {{solution}}")


class TestBridgeWithoutSolver:
    def test_objective_recomputed(self, tmp_path):
        cfg = _fake_solver(tmp_path, "open(sol, 'w').write('x1 0.5\\n')\n")
        res = solve_external(tiny_model(), cfg)
        assert res.objective == pytest.approx(0.5) and res.values == {"x1": 0.5}

    def test_launch_failure(self, tmp_path):
        with pytest.raises(SolverLaunchError):
            solve_external(tiny_model(), SolverBridgeConfig(f"{tmp_path}/missing {{model}} {{solution}}"))

    def test_nonzero_exit(self, tmp_path):
        with pytest.raises(SolverLaunchError):
            solve_external(tiny_model(), _fake_solver(tmp_path, "sys.exit(3)\n"))

    def test_missing_solution(self, tmp_path):
        with pytest.raises(SolutionParseError):
            solve_external(tiny_model(), _fake_solver(tmp_path, "pass\n"))

    def test_garbage_solution(self, tmp_path):
        with pytest.raises(SolutionParseError):
            solve_external(tiny_model(), _fake_solver(tmp_path, "open(sol, 'w').write('what is this\\n')\n"))

    def test_unknown_variable(self, tmp_path):
        with pytest.raises(SolutionParseError):
            solve_external(tiny_model(), _fake_solver(tmp_path, "open(sol, 'w').write('z9 1\\n')\n"))


@needs_highs
class TestBridgeHighs:
    def test_tiny(self):
        assert solve_external(tiny_model(), highs_config()).objective == pytest.approx(0.5, abs=1e-9)

    def test_offset_and_scale(self):
        mb = ModelBuilder("third")
        x = mb.add_var("x1", upper=1)
        mb.add_constraint("c", [(Fraction(1, 3), x)], ">=", Fraction(1, 7))
        mb.set_objective([(Fraction(1, 3), x)], Fraction(1, 7))
        res = solve_external(mb.build(), highs_config())
        assert res.objective == pytest.approx(1 / 7 + 1 / 7, abs=1e-9)

    def test_integer_mode(self):
        m = fortet_model(((1, 1, 1), -1), [(SignedProduct((), (1, 2, 3)), 1)], 3)
        res = solve_external(m, highs_config("integer"))
        assert res.objective == pytest.approx(0, abs=1e-9)

    def test_value_indicator_four(self):
        assert solve_external(value_indicator_ip(4), highs_config()).objective == pytest.approx(2, abs=1e-6)

    def test_parity_nogood_integral(self):
        g = BooleanFn(2, lambda x: (x[0] + x[1]) % 2, name="parity")
        rng = random.Random(0)
        for _ in range(20):
            weights = [Fraction(rng.randint(-9, 9)) for _ in range(2)]
            m = nogood_model([g], (weights, 0), 2, weights=[Fraction(rng.randint(-9, 9))])
            res = solve_external(m, highs_config())
            assert all(min(abs(v), abs(1 - v)) < 1e-7 for v in res.values.values())

    def test_fortet_vertices_integral(self):
        rng = random.Random(1)
        prod = SignedProduct((1,), (2, 3))
        for _ in range(10):
            a = [rng.randint(-5, 5) for _ in range(3)]
            m = fortet_model((a, 0), [(prod, rng.choice([-4, -1, 2, 5]))], 3)
            res = solve_external(m, highs_config())
            assert all(min(abs(v), abs(1 - v)) < 1e-7 for v in res.values.values())
            values = {k: round(v) for k, v in res.values.items()}
            assert float(objective(m, values)) == pytest.approx(res.objective)

