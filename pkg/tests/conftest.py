import pytest

from wdqualifiers.model import AdmissibilityConfig
from wdqualifiers.taxonomy import load_default_classification


@pytest.fixture(scope="session")
def cfg():
    return AdmissibilityConfig.default()


@pytest.fixture(scope="session")
def registry():
    return load_default_classification()
