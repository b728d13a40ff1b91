import numpy as np
import pytest

from trmstress.elastodyn import LoadFamily, MaterialField, build_load_schedule
from trmstress.randfield import SpectralConfig, generate_microstructure


@pytest.fixture(scope="session")
def small_case():
    """16x16 two-phase plate with a short default-family load."""
    ms, iface = generate_microstructure(SpectralConfig(rng_seed=11), 0.5, 16, 16, 2.0)
    mat = MaterialField.from_phase_map(ms.phase_map, ms.grid_spacing)
    load = build_load_schedule(LoadFamily(duration=2e-6, n_steps=101, n_edge=65), seed=4)
    return ms, iface, mat, load


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = []


@pytest.fixture(scope="session")
def criterion():
    """Record one acceptance line: criterion(id, passed, detail)."""

    def record(cid, passed, detail):
        _CRITERIA.append((cid, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} criterion {cid}: {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {cid}: {detail}")
