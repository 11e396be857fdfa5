"""Bridge-compatible solver command backed by HiGHS (optional ``highspy``).

Usage::

    python -m pbflin.highs_runner MODEL.lp SOLUTION.txt

Writes ``=status=``, ``=obj=`` (without the model's offset comment) and one
``<name> <value>`` line per column, which is the format read by
:func:`pbflin.milp.parse_solution`.
"""

import importlib.util
import shlex
import sys


def available() -> bool:
    return importlib.util.find_spec("highspy") is not None


def bridge_command() -> str:
    """Command template running this module with the current interpreter."""
    return f"{shlex.quote(sys.executable)} -m pbflin.highs_runner {{model}} {{solution}}"


def run(model_path, solution_path):
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    if h.readModel(str(model_path)) != highspy.HighsStatus.kOk:
        print(f"HiGHS could not read {model_path}", file=sys.stderr)
        return 2
    h.run()
    status = h.getModelStatus()
    with open(solution_path, "w") as out:
        if status != highspy.HighsModelStatus.kOptimal:
            out.write(f"=status= {h.modelStatusToString(status).replace(' ', '_').lower()}\n")
            return 0
        out.write("=status= optimal\n")
        out.write(f"=obj= {h.getInfo().objective_function_value!r}\n")
        lp = h.getLp()
        values = h.getSolution().col_value
        for name, value in zip(lp.col_names_, values):
            out.write(f"{name} {value!r}\n")
    return 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m pbflin.highs_runner MODEL SOLUTION", file=sys.stderr)
        return 2
    return run(*argv)


if __name__ == "__main__":
    sys.exit(main())
