import pytest

from stabconn.graph import build_graph, figure1, parse_graph


@pytest.fixture
def triangle():
    return parse_graph("3 3\n1 2\n2 3\n3 1\n")


@pytest.fixture
def single_edge():
    return parse_graph("2 1\n1 2\n")


@pytest.fixture
def path3():
    return parse_graph("3 2\n1 2\n2 3\n")


@pytest.fixture
def star4():
    # center 1 with three leaves
    return parse_graph("4 3\n1 2\n1 3\n1 4\n")


@pytest.fixture
def fig1():
    return figure1()


@pytest.fixture
def k4_adversarial():
    """K4 with ports arranged so a corrupted all-ones path of maximal length
    undercuts the legitimate paths of nodes 3 and 4."""
    return build_graph(
        4,
        [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)],
        {1: (2, 3, 4), 2: (1, 3, 4), 3: (4, 1, 2), 4: (3, 1, 2)},
    )
