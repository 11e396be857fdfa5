import io
import subprocess
import sys

import pytest

from pbflin import highs_runner
from pbflin.cli import main

EXAMPLE = "n=3\n1 * x1*x2\n1 * x1*x3\n1 * x2*x3\n-1 * x1*x2*x3\n"


def run(*argv, env=None):
    out = io.StringIO()
    code = main(list(argv), out=out, env={} if env is None else env)
    return code, out.getvalue()


@pytest.fixture
def example(tmp_path):
    path = tmp_path / "example.poly"
    path.write_text(EXAMPLE)
    return str(path)


@pytest.fixture
def and_table(tmp_path):
    path = tmp_path / "and.tt"
    path.write_text("n=2\n0001\n")
    return str(path)


class TestExpand:
    def test_labs(self):
        assert run("expand", "--labs", "3") == (0, "n=3\n5\n-4 * x1\n-4 * x3\n8 * x1*x3\n")

    def test_labs_too_short(self):
        assert run("expand", "--labs", "2")[0] == 2

    def test_canonicalizes(self, tmp_path):
        path = tmp_path / "affine.poly"
        path.write_text("n=2\n# comment\n2 * x2\n1/2 * x1\n-3\n")
        assert run("expand", str(path)) == (0, "n=2\n-3\n1/2 * x1\n2 * x2\n")

    def test_values(self, tmp_path):
        path = tmp_path / "and.values"
        path.write_text("n=2\n0 0 0 1\n")
        assert run("expand", "--values", str(path)) == (0, "n=2\n1 * x1*x2\n")

    def test_missing_file(self, tmp_path):
        assert run("expand", str(tmp_path / "nope.poly"))[0] == 2

    def test_needs_one_source(self, example):
        assert run("expand", example, "--labs", "3")[0] == 2


class TestLc:
    def test_signed_products(self, example):
        code, out = run("lc", example, "--family", "C")
        assert code == 0
        assert "k=1\n" in out and "verified=yes" in out
        assert "a1=1\na2=1\na3=1\n" in out and "beta=-1\n" in out
        assert "term C I=- J=1,2,3 b=1" in out

    def test_monomials(self, example):
        code, out = run("lc", example, "--family", "M")
        assert code == 0 and "k=4\n" in out

    def test_boolean(self, example):
        code, out = run("lc", example, "--family", "B")
        assert code == 0 and "k=1\n" in out and "verified=yes" in out

    @pytest.mark.parametrize("family", "MCB")
    def test_affine(self, tmp_path, family):
        path = tmp_path / "affine.poly"
        path.write_text("n=3\n1 * x1\n-2 * x3\n4\n")
        code, out = run("lc", str(path), "--family", family, "--csv")
        assert code == 0 and out.splitlines()[1] == f"{family},3,0,yes,0,yes"

    def test_random_is_seeded(self):
        a = run("lc", "--random", "3", "--family", "C", "--seed", "4")
        b = run("lc", "--random", "3", "--family", "C", "--seed", "4")
        assert a == b and a[0] == 0

    def test_arity_cap(self, tmp_path):
        path = tmp_path / "wide.poly"
        path.write_text("n=7\n1 * x1*x7\n")
        assert run("lc", str(path), "--family", "C")[0] == 3


class TestModel:
    def test_value_indicator_compat(self):
        code, out = run("model", "value-indicator", "10", "--compat")
        assert code == 0 and out.startswith("vars=199 cons=198 ")

    def test_standard(self):
        code, out = run("model", "standard", "3")
        assert code == 0 and out.startswith("vars=4 cons=3 ")

    def test_indicator_only_csv(self):
        assert run("model", "indicator-only", "3", "--csv") == (0, "kind,n,vars,cons,nonzeros,bound\n"
                                                                "indicator-only,3,8,40,164,\n")

    def test_nogood_cap(self, tmp_path):
        path = tmp_path / "big.tt"
        path.write_text("n=13\n" + "0" * (1 << 13) + "\n")
        assert run("model", "nogood", str(path))[0] == 3

    def test_nogood(self, and_table):
        code, out = run("model", "nogood", and_table)
        assert code == 0 and out.startswith("vars=3 cons=4 ")

    def test_fortet(self, example):
        code, out = run("model", "fortet", example)
        assert code == 0 and out.startswith("vars=7 cons=13 ")

    def test_write_lp(self, tmp_path):
        path = tmp_path / "vi3.lp"
        assert run("model", "value-indicator", "3", "--write-lp", str(path))[0] == 0
        assert path.read_text() == run("model", "value-indicator", "3", "--write-lp", "-")[1]

    def test_solve_without_bridge(self):
        assert run("model", "standard", "3", "--solve")[0] == 2

    def test_lowered_cap(self):
        assert run("model", "standard", "6", "--cap", "labs_expand=5")[0] == 3

    def test_raising_cap_needs_flag(self):
        assert run("model", "standard", "6", "--cap", "labs_expand=30")[0] == 2
        assert run("model", "standard", "6", "--cap", "labs_expand=30", "--unsafe-caps")[0] == 0

    def test_config_file_caps(self, tmp_path):
        cfg = tmp_path / "pbflin.cfg"
        cfg.write_text("cap.labs_expand = 4\n")
        assert run("model", "standard", "5", "--config", str(cfg))[0] == 3

    def test_bridge_failure_exit_code(self, tmp_path):
        env = {"PBFLIN_SOLVER_COMMAND": f"{tmp_path}/no-such-solver {{model}} {{solution}}"}
        assert run("model", "standard", "3", "--solve", env=env)[0] == 4

    @pytest.mark.skipif(not highs_runner.available(), reason="highspy not installed")
    def test_solve_with_highs(self):
        env = {"PBFLIN_SOLVER_COMMAND": highs_runner.bridge_command()}
        code, out = run("model", "value-indicator", "4", "--solve", env=env)
        assert code == 0 and out.rstrip().endswith("bound=2.0")


class TestLabs:
    def test_solve(self):
        assert run("labs", "solve", "13") == (0, "N=13 opt=6 witness=+-+-++--+++++ points=4096\n")

    def test_solve_workers(self):
        assert run("labs", "solve", "14", "--workers", "1") == run("labs", "solve", "14", "--workers", "4")

    def test_energy(self):
        assert run("labs", "energy", "+++-") == (0, "energy=2\n")

    def test_energy_bad(self):
        assert run("labs", "energy", "++0")[0] == 2

    def test_table_csv(self):
        code, out = run("labs", "table", "3..10", "--csv")
        rows = [line.split(",") for line in out.splitlines()]
        assert code == 0 and rows[0][:2] == ["N", "opt"]
        assert [int(r[1]) for r in rows[1:]] == [1, 2, 2, 7, 3, 8, 12, 13]
        assert [int(r[6]) for r in rows[1:]] == [16, 30, 48, 70, 96, 126, 160, 198]

    def test_table_deterministic(self):
        assert run("labs", "table", "3..9") == run("labs", "table", "3..9", "--workers", "4")

    def test_bad_range(self):
        assert run("labs", "table", "9..3")[0] == 2
        assert run("labs", "table", "2..4")[0] == 2


class TestSeparate:
    def test_violated(self, and_table):
        code, out = run("separate", and_table, "--point", "0.6,0.6", "--y", "0.1")
        assert code == 0
        assert out == "nogood_v3: -1 x1 - 1 x2 + 1 y >= -1\nviolation=1/10\n"

    def test_consistent(self, and_table):
        assert run("separate", and_table, "--point", "1,1", "--y", "1") == (0, "none\n")

    def test_malformed_point(self, and_table):
        assert run("separate", and_table, "--point", "0.5,abc", "--y", "0")[0] == 2
        assert run("separate", and_table, "--point", "0.5", "--y", "0")[0] == 2


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["model"])
    assert info.value.code == 2


def test_console_script_module():
    proc = subprocess.run([sys.executable, "-m", "pbflin.cli", "labs", "energy", "+++-"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == "energy=2\n"
