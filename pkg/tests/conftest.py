"""Suite-wide hooks: deterministic hypothesis profile, acceptance summary."""

from hypothesis import settings

from .helpers import ACCEPTANCE_RESULTS

settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for description, ok in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {description}")
