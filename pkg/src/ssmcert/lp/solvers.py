"""LP solver adapters.

An adapter takes an :class:`~ssmcert.lp.constraints.LpInstance` and returns a
:class:`SolveResult`. Two are provided:

* :class:`HighsAdapter` calls HiGHS through ``scipy.optimize.linprog``.
* :class:`IncrementalHighsAdapter` keeps one ``highspy`` model alive and, when
  an instance only appends contraction rows to the previous one, adds just
  those rows and re-solves from the previous simplex basis.
* :class:`CommandAdapter` exports the instance as MPS, runs an external
  command and reads back a plain solution file. The command is a template with
  ``{mps}`` and ``{sol}`` placeholders; the solution file holds a line
  ``status <optimal|infeasible|unbounded|error>`` followed by ``<column> <value>``
  lines.

:func:`default_adapter` uses the command in ``SSMCERT_LP_SOLVER`` when set,
otherwise the incremental adapter if ``highspy`` is importable.
Running ``python -m ssmcert.lp.solvers IN.mps OUT.sol`` is a reference external
solver that honours this contract.
"""
import os
import shlex
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

try:
    import highspy
except ImportError:  # optional; scipy's bundled HiGHS is the fallback
    highspy = None

from ..errors import SolverError
from .mps import read_mps, write_mps

SOLVER_ENV = "SSMCERT_LP_SOLVER"
DUMP_ENV = "SSMCERT_DUMP_DIR"


@dataclass
class SolveResult:
    status: str
    x: np.ndarray = None
    objective: float = None
    message: str = ""
    info: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status == "optimal"


def dump_instance(instance, reason=""):
    """Write a failing instance to the dump directory and return its path."""
    base = os.environ.get(DUMP_ENV) or tempfile.gettempdir()
    os.makedirs(base, exist_ok=True)
    fd, path = tempfile.mkstemp(prefix="ssm_failed_", suffix=".mps", dir=base)
    os.close(fd)
    write_mps(instance, path)
    if reason:
        with open(path + ".txt", "w") as fh:
            fh.write(reason + "\n")
    return path


_HIGHS_STATUS = {0: "optimal", 2: "infeasible", 3: "unbounded"}


def _solve_arrays(cost, A, rhs, lower, upper):
    res = linprog(cost, A_ub=A, b_ub=rhs, bounds=np.column_stack([lower, upper]),
                  method="highs")
    status = _HIGHS_STATUS.get(res.status, "error")
    x = np.asarray(res.x) if res.x is not None else None
    return SolveResult(status, x, float(res.fun) if res.fun is not None else None, res.message)


class HighsAdapter:
    name = "highs"

    def solve(self, instance):
        try:
            res = _solve_arrays(instance.cost, instance.A, instance.rhs,
                                instance.lower, instance.upper)
        except Exception as exc:  # scipy raises assorted types on bad input
            path = dump_instance(instance, repr(exc))
            raise SolverError(f"HiGHS raised {exc!r}; instance dumped to {path}", path) from exc
        if res.status == "error":
            path = dump_instance(instance, res.message)
            raise SolverError(f"HiGHS failed: {res.message}; instance dumped to {path}", path)
        return res


def _same_key(a, b):
    # the layout is compared by identity; holding it keeps the id from being reused
    return b is not None and a[0] is b[0] and a[1:] == b[1:]


class IncrementalHighsAdapter:
    """HiGHS with warm starts across constraint-generation rounds."""

    name = "highs-incremental"

    def __init__(self):
        if highspy is None:
            raise SolverError("highspy is not installed")
        self._h = None
        self._key = None
        self._rows = None

    def _fresh(self, instance):
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        n = instance.A.shape[1]
        h.addVars(n, np.asarray(instance.lower, float), np.asarray(instance.upper, float))
        h.changeColsCost(n, np.arange(n, dtype=np.int32), np.asarray(instance.cost, float))
        self._h = h
        self._add(instance.A, instance.rhs)

    def _add(self, A, rhs):
        A = A.tocsr()
        m = A.shape[0]
        if m:
            self._h.addRows(m, np.full(m, -highspy.kHighsInf), np.asarray(rhs, float), A.nnz,
                            A.indptr[:-1].astype(np.int32), A.indices.astype(np.int32),
                            A.data.astype(float))

    def _extends(self, instance, key):
        rows = getattr(instance, "_rows", None)
        if self._h is None or not _same_key(key, self._key) or rows is None or self._rows is None:
            return False
        n = len(self._rows)
        return len(rows) >= n and np.array_equal(rows[:n], self._rows)

    def solve(self, instance):
        rows = getattr(instance, "_rows", None)
        key = (instance.layout, instance.A.shape[1], instance.positivity_floor,
               float(instance.big))
        try:
            if self._extends(instance, key):
                n_old, n_new = len(self._rows), len(rows)
                self._add(instance.A[n_old:n_new], instance.rhs[n_old:n_new])
            else:
                self._fresh(instance)
            self._key = key
            self._rows = None if rows is None else np.array(rows, copy=True)
            self._h.run()
            status = self._h.getModelStatus()
        except Exception as exc:
            self._h = None
            path = dump_instance(instance, repr(exc))
            raise SolverError(f"HiGHS raised {exc!r}; instance dumped to {path}", path) from exc
        ms = highspy.HighsModelStatus
        if status == ms.kOptimal:
            x = np.array(self._h.getSolution().col_value)
            return SolveResult("optimal", x, float(instance.cost @ x))
        if status == ms.kInfeasible:
            return SolveResult("infeasible")
        if status == ms.kUnbounded:
            return SolveResult("unbounded")
        self._h = None
        path = dump_instance(instance, str(status))
        raise SolverError(f"HiGHS failed: {status}; instance dumped to {path}", path)


def read_solution(path, col_names):
    status = "error"
    values = {}
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "status":
                status = parts[1]
            else:
                values[parts[0]] = float(parts[1])
    x = None
    if status == "optimal":
        missing = [c for c in col_names if c not in values]
        if missing:
            raise SolverError(f"solution lacks {len(missing)} columns, e.g. {missing[0]}")
        x = np.array([values[c] for c in col_names])
    return status, x


class CommandAdapter:
    """Run an external solver through the MPS / solution-file contract."""

    name = "command"

    def __init__(self, command, timeout=None):
        self.command = command
        self.timeout = timeout

    def solve(self, instance):
        cols = instance.var_names()
        with tempfile.TemporaryDirectory(prefix="ssmlp_") as tmp:
            mps = os.path.join(tmp, "instance.mps")
            sol = os.path.join(tmp, "instance.sol")
            write_mps(instance, mps)
            cmd = [part.format(mps=mps, sol=sol) for part in shlex.split(self.command)]
            try:
                proc = subprocess.run(cmd, capture_output=True, text=True, timeout=self.timeout)
            except (OSError, subprocess.TimeoutExpired) as exc:
                path = dump_instance(instance, repr(exc))
                raise SolverError(f"solver command failed: {exc}; instance dumped to {path}",
                                  path) from exc
            if proc.returncode != 0 or not os.path.exists(sol):
                path = dump_instance(instance, proc.stderr)
                raise SolverError(
                    f"solver exited with {proc.returncode}; instance dumped to {path}", path)
            status, x = read_solution(sol, cols)
        if status not in ("optimal", "infeasible", "unbounded"):
            path = dump_instance(instance, f"status {status}")
            raise SolverError(f"solver reported {status}; instance dumped to {path}", path)
        obj = float(instance.cost @ x) if x is not None else None
        return SolveResult(status, x, obj)


def default_adapter():
    cmd = os.environ.get(SOLVER_ENV)
    if cmd:
        return CommandAdapter(cmd)
    return IncrementalHighsAdapter() if highspy is not None else HighsAdapter()


def _reference_main(argv):
    if len(argv) != 2:
        print("usage: python -m ssmcert.lp.solvers IN.mps OUT.sol", file=sys.stderr)
        return 2
    model = read_mps(argv[0])
    res = _solve_arrays(model.cost, model.A, model.rhs, model.lower, model.upper)
    with open(argv[1], "w") as fh:
        fh.write(f"status {res.status}\n")
        if res.x is not None and res.ok:
            for name, val in zip(model.col_names, res.x):
                fh.write(f"{name} {float(val)!r}\n")
    return 0


if __name__ == "__main__":
    sys.exit(_reference_main(sys.argv[1:]))
