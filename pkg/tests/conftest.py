import os

import hypothesis
import numpy as np
import pytest

from lielac.energy import ProblemInstance
from lielac.fields import AceIcParams, GrfParams, QueryWindow, SineICParams, gen_ace_ic, gen_grf_ic, gen_sine_ic

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False, deadline=None)
hypothesis.settings.load_profile(os.getenv("LIELAC_HYPOTHESIS_PROFILE", "fast"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def heat_instance():
    ic = gen_sine_ic(SineICParams((5.0,), (2,), (0.0,)), n=65)
    return ProblemInstance(ic, QueryWindow(0.0, 2 * np.pi, 0.0, 16.0), 'heat')


@pytest.fixture
def burgers_instance():
    ic = gen_grf_ic(GrfParams(mean_offset=0.2), n=129, seed=7)
    return ProblemInstance(ic, QueryWindow(0.0, 1.0, 0.0, 1.0), 'burgers')


@pytest.fixture
def ace_instance():
    coeffs = np.random.default_rng(5).uniform(-1, 1, (4, 4))
    ic = gen_ace_ic(AceIcParams(coeffs, 0.85, 0.31, 0.62), n=16)
    return ProblemInstance(ic, QueryWindow(0.0, 1.0, 0.0, 1.0), 'se2')
