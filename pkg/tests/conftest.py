"""Shared test configuration.

Pin BLAS to a single thread before numpy is imported anywhere: the test
box exposes one core and oversubscribed thread pools slow the dense
eigensolves down instead of speeding them up.
"""

import os
import sys

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Repeat the acceptance verdict lines after the run.

    The acceptance tests print their scoreboard as they go, but capture
    hides it on passing tests; echoing the collected lines here keeps
    the full scoreboard visible in any mode.
    """
    mod = (sys.modules.get("test_acceptance")
           or sys.modules.get("tests.test_acceptance"))
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.write_sep("=", "acceptance scoreboard")
        for line in lines:
            terminalreporter.write_line(line)
