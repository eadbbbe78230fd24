import pytest
from hypothesis import settings

from wmfred.kernel import DriftSpec, ObservablePoint

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")


@pytest.fixture
def canonical():
    return DriftSpec((-0.5, 0.5), 0.5)


@pytest.fixture
def three_particle():
    return DriftSpec((-0.6, 0.0, 0.7), 0.4)


@pytest.fixture
def single():
    return DriftSpec((0.3,), 0.5)


@pytest.fixture
def at_zero():
    return ObservablePoint(1.0, 0.0)
