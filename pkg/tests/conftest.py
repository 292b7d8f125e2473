import pytest

from coalesce.chains import build_generator
from coalesce.graphs import complete_graph, cycle_graph, path_graph, torus_graph


@pytest.fixture(scope="session")
def k2_chain():
    return build_generator(path_graph(2))


@pytest.fixture(scope="session")
def cycle4_chain():
    return build_generator(cycle_graph(4))


@pytest.fixture(scope="session")
def complete4_chain():
    return build_generator(complete_graph(4))


@pytest.fixture(scope="session")
def torus33_chain():
    return build_generator(torus_graph(3, 3))
