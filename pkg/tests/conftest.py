import math

import pytest

from ucwfp import kernels
from ucwfp.mappings import make_map
from ucwfp.soperator import SOperator
from ucwfp.spaces import make_space

SPACE_CONFIGS = {
    "euclidean": {"model": "euclidean", "n": 2, "R": 1},
    "sparse_l2": {"model": "sparse_l2", "R": 1},
    "hyperboloid": {"model": "hyperboloid", "rho": 1},
    "startree": {"model": "startree", "k": 3, "L": 1},
}


@pytest.fixture(params=sorted(SPACE_CONFIGS))
def any_space(request):
    return make_space(SPACE_CONFIGS[request.param])


@pytest.fixture
def euclid():
    return make_space(SPACE_CONFIGS["euclidean"])


@pytest.fixture
def sparse():
    return make_space(SPACE_CONFIGS["sparse_l2"])


@pytest.fixture
def hyper():
    return make_space(SPACE_CONFIGS["hyperboloid"])


@pytest.fixture
def tree():
    return make_space(SPACE_CONFIGS["startree"])


def build(space_cfg, map_cfg, **op_kw):
    space = make_space(space_cfg)
    tmap = make_map(space, map_cfg)
    return space, tmap, SOperator(tmap, **op_kw)


@pytest.fixture
def rotation_op():
    return build(SPACE_CONFIGS["euclidean"], {"map": "rotation", "theta": math.pi / 2})


@pytest.fixture
def gk_op():
    return build(SPACE_CONFIGS["sparse_l2"], {"map": "goebelkirk"})


@pytest.fixture
def restore_backend():
    before = kernels.BACKEND
    yield
    kernels.use(before)


# acceptance lines, echoed at the end of the run
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
