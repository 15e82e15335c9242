import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.register_profile("ci", max_examples=15, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


# acceptance criteria: one PASS/FAIL line each in the terminal summary
ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_") or report.when != "call" and report.passed:
        return
    details = dict(report.user_properties).get("detail", "")
    entry = ACCEPTANCE.setdefault(name, ["PASS", details])
    if report.failed:
        entry[0] = "FAIL"
    if details:
        entry[1] = details


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s.split("_")[2])):
        status, details = ACCEPTANCE[name]
        terminalreporter.write_line(f"criterion {name.split('_')[2]}: {status}  {details}")
