import os

import pytest
from hypothesis import HealthCheck, settings

from rquant import corpus

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

MANIFESTS = os.path.join(os.path.dirname(__file__), os.pardir, "manifests")


@pytest.fixture(scope="session")
def euclidean():
    return corpus.euclidean()


@pytest.fixture(scope="session")
def polar():
    return corpus.polar()


@pytest.fixture(scope="session")
def sphere():
    return corpus.sphere()


@pytest.fixture(scope="session")
def line():
    return corpus.line()


@pytest.fixture(scope="session", params=["euclidean", "polar", "sphere"])
def metric(request):
    return corpus.corpus()[request.param]


@pytest.fixture
def manifest_path():
    def path(name):
        return os.path.normpath(os.path.join(MANIFESTS, name))

    return path
