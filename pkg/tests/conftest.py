import logging

import numpy as np
import pytest

from stride_intent.synth import SessionSpec, generate_session

logging.getLogger("stride_intent").setLevel(logging.ERROR)


@pytest.fixture(scope="session")
def small_session():
    """A short but complete synthetic session shared across test modules."""
    return generate_session(SessionSpec(seed=11, n_trials_per_mode=3))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
