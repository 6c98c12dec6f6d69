"""The fourteen acceptance criteria at their stated tolerances.

Each test prints one ``[PASS]`` / ``[FAIL]`` line with the computed and
predicted values. A shared context caches sweeps and minimizers.
"""
import pytest

from giant_vortex.validation import CHECKS, Context, run_check


@pytest.fixture(scope="module")
def ctx():
    return Context(D_Omega=0.5, seed=0, threads=1)


@pytest.mark.parametrize("name", list(CHECKS))
def test_acceptance(name, ctx, capsys):
    rec = run_check(name, ctx)
    with capsys.disabled():
        print("\n" + rec.line())
    assert rec.passed, rec.line() + f"\ndetails: {rec.details}"
