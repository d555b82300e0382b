"""Shared fixtures: small topologies and models reused across modules."""

from __future__ import annotations

import numpy as np
import pytest

from maicnet.signal_model import SignalModel
from maicnet.topology import ClusteredTopology


@pytest.fixture
def path3() -> ClusteredTopology:
    """Three nodes in a line, one cluster."""
    return ClusteredTopology.from_edges(3, ((0, 1), (1, 2)), (0, 0, 0))


@pytest.fixture
def two_cluster_line() -> ClusteredTopology:
    """Four nodes in a line split into two clusters at the middle edge."""
    return ClusteredTopology.from_edges(4, ((0, 1), (1, 2), (2, 3)), (0, 0, 1, 1))


@pytest.fixture
def singleton_chain() -> ClusteredTopology:
    """Three single-node clusters in a line; node 1 borders both others."""
    return ClusteredTopology.from_edges(3, ((0, 1), (1, 2)), (0, 1, 2))


@pytest.fixture
def line_model(two_cluster_line) -> SignalModel:
    """Scalar model on the two-cluster line with distinct cluster means.

    Means differ across clusters so the spread and cross forcing terms
    are both nonzero, which the theory tests rely on.
    """
    return SignalModel.from_profiles(
        two_cluster_line,
        dim=1,
        reg_power=(1.0, 1.3, 0.8, 1.1),
        noise_var=(0.02, 0.015, 0.025, 0.01),
        step_size=0.1,
        cluster_means=((1.0,), (1.4,)),
        sigma_w=(1.0, 0.8),
        spread_scale=0.05**2,
        gamma=((1.0, 0.6), (0.6, 1.0)),
    )


@pytest.fixture
def scalar_node() -> tuple[ClusteredTopology, SignalModel]:
    """Single node, scalar parameter; every theory quantity is hand-computable."""
    topology = ClusteredTopology.from_edges(1, (), (0,))
    model = SignalModel.from_profiles(
        topology,
        dim=1,
        reg_power=(1.0,),
        noise_var=(0.01,),
        step_size=0.1,
        cluster_means=((0.35,),),
        sigma_w=(1.0,),
        spread_scale=0.0,
        gamma=((1.0,),),
    )
    return topology, model


def make_rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
