import numpy as np
import pytest

from wavqtl import preprocess, simulate


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def associated_site():
    """A seeded narrow-effect site with its genotype, prepared without covariates."""
    sim = simulate.simulate_site(simulate.Scenario(kind="narrow_strong", depth=400, seed=11))
    return sim, preprocess.prepare_site(sim.site)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record a numbered acceptance outcome; printed in the terminal summary."""
    store = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(number, passed, detail):
        store[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        passed, detail = store[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
