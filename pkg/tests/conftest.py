import json
from importlib import resources
from pathlib import Path

import pytest

from vpon.scenario import load_config, scenario_from_config

FIXTURES = Path(__file__).parent / "fixtures"


def config_path(name):
    return resources.files("vpon") / "configs" / f"{name}.json"


def load_scenario(name, **overrides):
    doc = load_config(config_path(name))
    doc.update(overrides)
    return scenario_from_config(doc)


@pytest.fixture(scope="session")
def golden():
    return json.loads((FIXTURES / "golden.json").read_text())


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")
