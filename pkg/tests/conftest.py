import os
import subprocess
import sys

import pytest
from hypothesis import HealthCheck, settings

from ssmcert.branching import BranchingMatrix
from ssmcert.lattice import build_cycle_free_matrix, reduced_named_machine

settings.register_profile(
    "default", max_examples=100, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def dh():
    return reduced_named_machine("D_H")


@pytest.fixture(scope="session")
def dg():
    return reduced_named_machine("D_G")


@pytest.fixture(scope="session")
def dprime():
    return reduced_named_machine("D_prime")


@pytest.fixture(scope="session")
def tri():
    return BranchingMatrix([[3]])


@pytest.fixture(scope="session")
def m4_small():
    return build_cycle_free_matrix(4, trim_boundary=True, minimize=True)


@pytest.fixture
def run_cli(tmp_path):
    """Run the console entry point in a subprocess; returns CompletedProcess."""
    def run(*args, env=None):
        full_env = dict(os.environ)
        full_env.update(env or {})
        return subprocess.run([sys.executable, "-m", "ssmcert.cli", *map(str, args)],
                              capture_output=True, text=True, cwd=tmp_path, env=full_env)
    return run


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
