import pytest

CRITERIA = {
    1: "elasticity example: eigenvalues, rank-one minimum, det term, MP verdict",
    2: "cubic example: Euler residual, LH minimum, MP violation witness",
    3: "needle sweep, violation branch (cubic)",
    4: "needle sweep, convex branch (dirichlet)",
    5: "conjugate-system identity",
    6: "H-excess equivalence on random quadratic integrands",
    7: "byte-identical CLI reports",
}

_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    key = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes.setdefault(key, []).append((item.name, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA):
        runs = _outcomes.get(key)
        if not runs:
            terminalreporter.write_line(f"criterion {key}: NOT RUN  {CRITERIA[key]}")
            continue
        failed = [name for name, ok in runs if not ok]
        status = "PASS" if not failed else "FAIL"
        extra = f"  (failed: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {key}: {status}  {CRITERIA[key]}{extra}")
