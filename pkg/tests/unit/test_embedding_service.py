"""
Tests for the 2-D embedding and density clustering.
"""
import numpy as np
import pytest
from sklearn.neighbors import NearestNeighbors

from cogplay.errors import StatsPreconditionError
from cogplay.models.trajectory import ClusterParams, EmbedParams
from cogplay.services.embedding_service import (
    dbscan,
    embed_2d,
    find_ab_params,
    fuzzy_simplicial_set,
    make_epochs_per_sample,
    neighbor_preservation,
    smooth_knn_dist,
)


@pytest.fixture(scope="module")
def two_blobs():
    """Two well-separated 27-D Gaussian blobs of 40 points each."""
    rng = np.random.default_rng(0)
    a = rng.normal(0.0, 1.0, size=(40, 27))
    b = rng.normal(8.0, 1.0, size=(40, 27))
    return np.vstack([a, b]), np.repeat([0, 1], 40)


@pytest.fixture(scope="module")
def blob_embedding(two_blobs):
    points, _ = two_blobs
    return embed_2d(points, seed=11)


class TestGraph:
    def test_ab_params_for_standard_curve(self):
        a, b = find_ab_params(spread=1.0, min_dist=0.1)
        assert a == pytest.approx(1.577, abs=0.01)
        assert b == pytest.approx(0.895, abs=0.01)

    def test_bandwidth_hits_target_cardinality(self):
        rng = np.random.default_rng(3)
        distances = np.hstack([np.zeros((20, 1)), np.sort(rng.uniform(0.5, 3.0, size=(20, 5)), axis=1)])
        sigmas, rhos = smooth_knn_dist(distances, k=5.0)

        assert np.allclose(rhos, distances[:, 1])
        psum = np.exp(-np.maximum(distances[:, 1:] - rhos[:, None], 0.0) / sigmas[:, None]).sum(axis=1)
        assert np.allclose(psum, np.log2(5.0), atol=1e-3)

    def test_membership_graph_is_symmetric(self, two_blobs):
        points, _ = two_blobs
        graph = fuzzy_simplicial_set(points, n_neighbors=5)
        dense = graph.toarray()

        assert np.allclose(dense, dense.T)
        assert np.all(np.diag(dense) == 0.0)
        assert dense.max() <= 1.0 + 1e-12
        assert dense.min() >= 0.0

    def test_strongest_edge_sampled_every_epoch(self):
        schedule = make_epochs_per_sample(np.array([1.0, 0.5, 0.25]), n_epochs=200)
        assert schedule.tolist() == [1.0, 2.0, 4.0]


class TestEmbed2D:
    """Seeded projection to two dimensions."""

    def test_shape_and_determinism(self, two_blobs, blob_embedding):
        points, _ = two_blobs
        assert blob_embedding.shape == (80, 2)
        assert np.array_equal(blob_embedding, embed_2d(points, seed=11))

    def test_different_seed_different_layout(self, two_blobs, blob_embedding):
        points, _ = two_blobs
        assert not np.array_equal(blob_embedding, embed_2d(points, seed=12))

    def test_blobs_stay_apart(self, two_blobs, blob_embedding):
        _, labels = two_blobs
        _, idx = NearestNeighbors(n_neighbors=6).fit(blob_embedding).kneighbors(blob_embedding)
        same = labels[idx[:, 1:]] == labels[:, None]
        for blob in (0, 1):
            assert same[labels == blob].mean() >= 0.95

    def test_neighbor_preservation_score(self, two_blobs, blob_embedding):
        points, _ = two_blobs
        assert 0.0 <= neighbor_preservation(points, blob_embedding) <= 1.0
        assert neighbor_preservation(points, points) == 1.0

    def test_duplicates_land_together(self, two_blobs):
        points, _ = two_blobs
        duplicated = np.vstack([points, points[:3]])
        embedding = embed_2d(duplicated, seed=5)

        diameter = float(np.ptp(embedding, axis=0).max())
        for i in range(3):
            assert np.linalg.norm(embedding[i] - embedding[80 + i]) < 0.01 * diameter

    def test_too_few_points(self):
        with pytest.raises(StatsPreconditionError, match="at least 6 points"):
            embed_2d(np.zeros((5, 27)))

    def test_non_finite_features(self, two_blobs):
        points, _ = two_blobs
        broken = points.copy()
        broken[3, 4] = np.nan
        with pytest.raises(StatsPreconditionError, match="finite"):
            embed_2d(broken)

    def test_custom_neighbour_count(self, two_blobs):
        points, _ = two_blobs
        embedding = embed_2d(points, EmbedParams(n_neighbors=10, n_epochs=50), seed=0)
        assert embedding.shape == (80, 2)
        assert np.all(np.isfinite(embedding))


class TestDBSCAN:
    def test_two_separated_groups(self):
        rng = np.random.default_rng(1)
        points = np.vstack([rng.normal(0.0, 0.2, size=(40, 2)), rng.normal(20.0, 0.2, size=(40, 2))])
        labels = dbscan(points)
        assert set(labels.tolist()) == {0, 1}
        assert len(set(labels[:40].tolist())) == 1
        assert labels[0] != labels[40]

    def test_sparse_input_is_noise(self):
        labels = dbscan(np.random.default_rng(2).normal(size=(20, 2)))
        assert set(labels.tolist()) == {-1}

    def test_identical_points_form_one_cluster(self):
        labels = dbscan(np.ones((35, 2)))
        assert set(labels.tolist()) == {0}

    def test_parameters_are_respected(self):
        points = np.vstack([np.zeros((5, 2)), np.full((5, 2), 3.0)])
        labels = dbscan(points, ClusterParams(eps=0.5, min_samples=3))
        assert sorted(set(labels.tolist())) == [0, 1]

    def test_empty_input(self):
        assert dbscan(np.zeros((0, 2))).size == 0
