import pytest

from semnav.executive import FrozenClock
from semnav.experiment import default_policy, fiir_world, run_experiment


@pytest.fixture(scope="session")
def world():
    return fiir_world()


@pytest.fixture(scope="session")
def graph(world):
    return world[0]


@pytest.fixture(scope="session")
def pois(world):
    return world[1]


@pytest.fixture(scope="session")
def policy():
    return default_policy()


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    """One frozen-clock replay of the full three-session protocol."""
    return run_experiment(tmp_path_factory.mktemp("experiment"), clock=FrozenClock())


@pytest.fixture(scope="session")
def all_decisions(artifacts):
    """Every scenario-level decision of sessions A, B and C (returns excluded)."""
    entries = (
        artifacts.session_a.entries
        + artifacts.session_b.entries
        + [e for r in artifacts.session_c.values() for e in r.entries]
    )
    return [e for e in entries if not e.extra.get("return_command")]
