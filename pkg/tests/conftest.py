import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).resolve().parent))

settings.register_profile(
    "weylcheck",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("weylcheck")


@pytest.fixture(scope="session")
def builtins_all():
    from weylcheck import densities
    return {n: densities.builtin(n) for n in densities.BUILTIN_NAMES}
