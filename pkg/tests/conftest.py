import shutil
import subprocess

import pytest

Z3 = shutil.which("z3")


def run_solver(script: str, timeout: int = 30) -> str:
    """Feed an SMT-LIB script to the z3 binary and return its first answer."""
    out = subprocess.run([Z3, f"-T:{timeout}", "-in"], input=script, capture_output=True,
                         text=True, timeout=timeout + 10)
    return out.stdout.strip().splitlines()[0] if out.stdout.strip() else out.stderr.strip()


@pytest.fixture
def solver():
    if Z3 is None:
        pytest.skip("z3 binary not on PATH")
    return run_solver
