import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hems.scenario import load_scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session")
def hourly_reference():
    return load_scenario(SCENARIO_DIR / "reference_hourly.yaml")


@pytest.fixture(scope="session")
def halfhour_reference():
    return load_scenario(SCENARIO_DIR / "reference_halfhour.yaml")


@pytest.fixture(scope="session")
def hourly_sweep(hourly_reference):
    """All eight (case, dsm) solves of the hourly reference, shared across
    tests; key is (case, dsm)."""
    from hems.formulation import solve_scenario
    from hems.scenario import synth_case

    runs = {}
    for case in "ABCD":
        for dsm in (False, True):
            scenario = synth_case(case, dsm, hourly_reference)
            runs[(case, dsm)] = (scenario, solve_scenario(scenario))
    return runs
