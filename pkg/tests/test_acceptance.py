"""The acceptance gate: all twelve criteria, one pass/fail line each.

The full run takes on the order of fifteen minutes (the semiconcavity and
closed-loop criteria dominate); run with ``pytest tests/test_acceptance.py
-s`` to watch the per-criterion lines as they complete.
"""

import pytest

from srstab import acceptance


@pytest.fixture(scope="module")
def suite():
    results = []

    def progress(res):
        print(res.line(), flush=True)

    print()
    results = acceptance.run_suite(system_name=None, seed=0,
                                   progress=progress)
    return results


@pytest.mark.parametrize("k", range(1, 13))
def test_criterion(suite, k):
    res = suite[k - 1]
    assert not res.skipped, res.name
    assert res.passed, res.line()
