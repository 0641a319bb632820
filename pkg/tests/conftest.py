from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

from helpers import Org, make_org

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def org10() -> Org:
    return make_org([f"m{i}" for i in range(10)])


@pytest.fixture
def pair() -> Org:
    org = make_org(["buyer", "provider", "third"])
    chain = org.dao.bridge.execution
    for n in ("buyer", "provider", "third"):
        chain.credit(org.pk(n), "USDC", 10_000)
    return org


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
