"""Exception hierarchy shared by all modules.

Each class carries the process exit code the command-line tool uses for it,
so a caller can tell "input rejected" from "cap exceeded" from "solver
bridge failed" without parsing messages.
"""


class PbfError(Exception):
    exit_code = 1


class InputError(PbfError, ValueError):
    """Malformed or inconsistent input (bad arity, overlapping index sets, ...)."""

    exit_code = 2


class CapExceededError(PbfError):
    """A desk-scale enumeration cap would be exceeded."""

    exit_code = 3

    def __init__(self, what, value, cap, detail=None):
        self.what = what
        self.value = value
        self.cap = cap
        self.detail = detail
        msg = f"{what} = {value} exceeds cap {cap}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class BridgeError(PbfError):
    exit_code = 4


class SolverLaunchError(BridgeError):
    """The external solver could not be started or exited abnormally."""


class SolutionParseError(BridgeError):
    """The solution file written by the external solver is unreadable."""


def check_cap(what, value, cap):
    if value > cap:
        raise CapExceededError(what, value, cap)
