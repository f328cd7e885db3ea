import pytest

from coherence.experiments import Experiments


@pytest.fixture(scope="session")
def experiments():
    """One full experiment set, shared by the acceptance and report tests."""
    return Experiments()
