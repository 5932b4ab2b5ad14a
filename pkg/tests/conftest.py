# flake8: noqa

from .example.manage import setup

setup()

import numpy as np
import pytest

from copula.models import CopulaFamily
from copula.services import CopulaService


@pytest.fixture
def rng():
    return np.random.default_rng(np.random.SeedSequence(entropy=20221115))


@pytest.fixture
def frank_sample(rng):
    service = CopulaService()
    spec = service.theta_from_tau(family=CopulaFamily.FRANK, tau=0.25)
    return service.sample(spec=spec, n=150, rng=rng)
