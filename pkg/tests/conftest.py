import numpy as np
import pytest

from chargeplan.energy import default_priors, ng_from_normal
from chargeplan.instance import REGIMES, ChargerModel, FlightProfile
from chargeplan.solver import CostGraph


@pytest.fixture(scope="session")
def charger():
    return ChargerModel()


@pytest.fixture(scope="session")
def flight():
    return FlightProfile()


@pytest.fixture(scope="session")
def priors(flight):
    return default_priors(flight.uav_mass, flight.air_density)


@pytest.fixture(scope="session")
def ng_priors(priors):
    return {r: ng_from_normal(priors[r]) for r in REGIMES}


def make_graph(prize, service, edge, budget, node_ids=None):
    prize = np.asarray(prize, dtype=float)
    service = np.asarray(service, dtype=float)
    edge = np.asarray(edge, dtype=float)
    return CostGraph(n_nodes=len(prize), prize=prize, service_cost=service,
                     edge_cost=edge, budget=budget, node_ids=node_ids)


def grid_graph(points, prize, service, budget):
    """Graph with symmetric Euclidean edge costs from planted 2D points.

    ``points[0]`` is the start, ``points[-1]`` the end depot.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    edge = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    return make_graph(prize, service, edge, budget)
