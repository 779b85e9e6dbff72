"""One test per acceptance criterion; each prints its pass/fail line."""

import pytest

from relaycap import acceptance

SEED = 0
THREADS = 4


@pytest.fixture(scope="module")
def report():
    lines = []
    yield lines
    print("\n" + "\n".join(lines))


@pytest.mark.parametrize("fn", acceptance.CRITERIA, ids=[f"{i:02d}_{fn.__name__}"
                                                         for i, fn in enumerate(acceptance.CRITERIA, 1)])
def test_criterion(fn, report, capsys):
    res = acceptance.run_criterion(fn, SEED, THREADS)
    report.append(res.line())
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
