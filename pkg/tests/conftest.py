import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from erheo import constitutive as cm
from erheo.discretization import build_spaces
from erheo.mesh import generate_rectangle
from erheo.problem import make_problem_data

settings.register_profile(
    "erheo", max_examples=40, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("erheo")

ALL_S1 = "left:S1,right:S1,top:S1,bottom:S1"


@pytest.fixture(scope="session")
def square4():
    return build_spaces(generate_rectangle(4, 4, tag_rule=ALL_S1))


@pytest.fixture(scope="session")
def square8():
    return build_spaces(generate_rectangle(8, 8, tag_rule=ALL_S1))


@pytest.fixture(scope="session")
def channel8():
    """2 x 1 channel, traction outlet on the right."""
    return build_spaces(generate_rectangle(8, 4, 2.0, 1.0, tag_rule="right:S2"))


@pytest.fixture(scope="session")
def default_model():
    return cm.default_model()


@pytest.fixture(scope="session")
def poiseuille_data():
    return make_problem_data(E="uniform:0,1", u_hat="poiseuille:1")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
