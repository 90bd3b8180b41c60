import numpy as np
import pytest

from dstab.catalog import get_problem

CATALOG_IDS = [
    "flat4",
    "parabola",
    "ellipse:a=2,b=1",
    "hyperbola",
    "quadric:a=1,2,-1",
    "bilinear:A=1,2;3,4",
    "monomial:u=1,1",
    "monomial:u=1,2,3",
    "l1-3d",
    "rank1",
    "power:m=2",
]

CONSERVED_IDS = ["parabola", "ellipse:a=2,b=1", "monomial:u=1,2,3", "l1-3d", "rank1"]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=CATALOG_IDS)
def any_problem(request):
    return get_problem(request.param)


@pytest.fixture
def parabola():
    return get_problem("parabola")


@pytest.fixture
def ellipse():
    return get_problem("ellipse:a=2,b=1")


@pytest.fixture
def flat4():
    return get_problem("flat4")
