from pathlib import Path

import pytest

from sdvtest.cli import SHIPPED_CATALOGS, shipped
from sdvtest.gherkin import parse_feature
from sdvtest.mapping import load_overrides
from sdvtest.statechart import parse_statechart
from sdvtest.vss import load_catalog_files

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def catalog():
    return load_catalog_files([shipped(n) for n in SHIPPED_CATALOGS])


@pytest.fixture(scope="session")
def chart():
    return parse_statechart(shipped("cpds.chart").read_text())


@pytest.fixture(scope="session")
def overrides():
    return load_overrides(shipped("cpds.overrides"))


@pytest.fixture(scope="session")
def hvac_text():
    return (DATA / "hvac_scenario.feature").read_text()


@pytest.fixture(scope="session")
def hvac_feature(hvac_text):
    return parse_feature(hvac_text)
