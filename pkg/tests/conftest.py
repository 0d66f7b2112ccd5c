from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

from laddertx import uml2sql

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def ex() -> uml2sql.ExampleBundle:
    return uml2sql.bundle()


@pytest.fixture
def data_dir():
    from importlib import resources

    return resources.files("laddertx.data")
