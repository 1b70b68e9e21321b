import math

import numpy as np
import pytest

from cloudsched.datacenter import new_datacenter, snapshot
from cloudsched.errors import DomainError
from cloudsched.gnn.graph import (
    ClusterPartition,
    StateGraph,
    build_state_graph,
    cut_edges,
    normalize_adjacency,
    partition_graph,
)
from cloudsched.workload import WorkloadRequest


def request(freq=2000, cores=4, ram=8, duration=24):
    return WorkloadRequest(
        id="vm-0", cpu_frequency=freq, cores=cores, ram=ram, duration=duration, arrival=0
    )


class TestBuildStateGraph:
    def test_pm_clique_8(self):
        graph = build_state_graph(snapshot(new_datacenter(8)), [])
        assert graph.n_nodes == 8
        assert graph.adjacency.sum() / 2 == 28  # C(8,2)

    def test_smallest_bipartite(self):
        graph = build_state_graph(snapshot(new_datacenter(1)), [request()])
        assert graph.n_nodes == 2
        assert graph.adjacency.sum() / 2 == 1

    def test_infeasible_vm_gets_no_edge(self):
        graph = build_state_graph(snapshot(new_datacenter(1)), [request(freq=3500)])
        assert graph.n_nodes == 2
        assert graph.adjacency.sum() == 0

    def test_feature_rows(self):
        snap = snapshot(new_datacenter(1))
        price = {"loc-0": 0.12}
        graph = build_state_graph(snap, [request(freq=2500, cores=8, ram=4, duration=12)], price)
        np.testing.assert_allclose(graph.features[0], [1.0, 1.0, 0.0, 0.0, 0.12 / 0.15])
        np.testing.assert_allclose(
            graph.features[1], [8 / 32, 4 / 64, (2500 - 1600) / 1800, 12 / 48, 0.0]
        )
        assert graph.kinds == ("pm", "vm")


class TestNormalizeAdjacency:
    def test_isolated_node(self):
        np.testing.assert_allclose(normalize_adjacency(np.zeros((1, 1))), [[1.0]])

    def test_connected_pair(self):
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(normalize_adjacency(a), np.full((2, 2), 0.5))

    def test_three_node_path(self):
        # degrees of A+I: (2, 3, 2); entry (0,1) = 1/sqrt(2*3)
        a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        a_hat = normalize_adjacency(a)
        assert a_hat[0][1] == pytest.approx(1 / math.sqrt(6), rel=1e-12)
        assert a_hat[1][0] == pytest.approx(1 / math.sqrt(6), rel=1e-12)

    def test_symmetric_output_positive_rows(self):
        rng = np.random.default_rng(4)
        n = 6
        a = (rng.random((n, n)) < 0.4).astype(float)
        a = np.triu(a, 1)
        a = a + a.T
        a_hat = normalize_adjacency(a)
        np.testing.assert_allclose(a_hat, a_hat.T)
        assert (a_hat.sum(axis=1) > 0).all()

    def test_rejects_asymmetric(self):
        with pytest.raises(DomainError):
            normalize_adjacency(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(DomainError):
            normalize_adjacency(np.eye(2))


def graph_from_adjacency(a: np.ndarray) -> StateGraph:
    n = a.shape[0]
    return StateGraph(
        node_ids=tuple(f"n{i}" for i in range(n)),
        kinds=("pm",) * n,
        features=np.zeros((n, 5)),
        adjacency=a.astype(float),
    )


def two_triangles() -> StateGraph:
    a = np.zeros((6, 6))
    for i, j in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
        a[i, j] = a[j, i] = 1.0
    return graph_from_adjacency(a)


class TestPartitionGraph:
    def test_k1_single_cluster(self):
        p = partition_graph(two_triangles(), k=1)
        assert set(p.cluster_of) == {0}

    def test_kn_singletons(self):
        g = two_triangles()
        p = partition_graph(g, k=6)
        assert sorted(p.cluster_of) == list(range(6))

    def test_two_triangles_split_on_components(self):
        g = two_triangles()
        p = partition_graph(g, k=2)
        assert p.cluster_of[0] == p.cluster_of[1] == p.cluster_of[2]
        assert p.cluster_of[3] == p.cluster_of[4] == p.cluster_of[5]
        assert p.cluster_of[0] != p.cluster_of[3]
        assert cut_edges(g, p) == 0

    def test_k_out_of_range(self):
        with pytest.raises(DomainError):
            partition_graph(two_triangles(), k=0)
        with pytest.raises(DomainError):
            partition_graph(two_triangles(), k=7)

    def test_every_cluster_nonempty(self):
        g = build_state_graph(snapshot(new_datacenter(5)), [request()])
        for k in range(1, g.n_nodes + 1):
            p = partition_graph(g, k=k)
            assert p.k == k
            assert all(p.members(c) for c in range(k))

    def test_deterministic(self):
        g = two_triangles()
        assert partition_graph(g, k=2, seed=1) == partition_graph(g, k=2, seed=99)


def test_cluster_partition_validation():
    with pytest.raises(DomainError):
        ClusterPartition(cluster_of=(0, 0, 0), k=2)  # cluster 1 empty
