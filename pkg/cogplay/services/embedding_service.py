"""
Two-dimensional neighbour embedding and density clustering of trial features.

The embedding follows the fuzzy-simplicial-set construction: exact k-nearest
neighbours, per-point bandwidths calibrated so each local fuzzy set has
cardinality log2(k), a fuzzy union of the directed graph, and a cross-entropy
layout optimised by negative-sampling SGD. The layout is updated in epoch
batches so a given seed always yields the same coordinates.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse
from scipy.optimize import curve_fit
from sklearn.cluster import DBSCAN
from sklearn.neighbors import NearestNeighbors

from ..errors import StatsPreconditionError
from ..models.trajectory import ClusterParams, EmbedParams

logger = logging.getLogger(__name__)

SMOOTH_K_TOLERANCE = 1e-5
MIN_K_DIST_SCALE = 1e-3
BANDWIDTH_ITERATIONS = 64
GRADIENT_CLIP = 4.0
INIT_RANGE = 10.0
REPULSION_EPSILON = 0.001


def find_ab_params(spread: float, min_dist: float) -> Tuple[float, float]:
    """Fit a, b of 1 / (1 + a * d^(2b)) to the offset exponential set by spread and min_dist."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = np.linspace(0, spread * 3, 300)
    yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist) / spread))
    params, _ = curve_fit(curve, xv, yv)
    return float(params[0]), float(params[1])


def smooth_knn_dist(distances: np.ndarray, k: float, n_iter: int = BANDWIDTH_ITERATIONS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-point bandwidth sigma and nearest-neighbour distance rho.

    `distances` holds each point's sorted neighbour distances with the point
    itself in column 0. Sigma is found by bisection so that
    sum_j exp(-(d_j - rho) / sigma) = log2(k); all rows are searched at once.
    """
    n = distances.shape[0]
    target = np.log2(k)

    masked = np.where(distances > 0.0, distances, np.inf)
    rho = masked.min(axis=1)
    rho[~np.isfinite(rho)] = 0.0

    shifted = np.maximum(distances[:, 1:] - rho[:, None], 0.0)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    mid = np.ones(n)
    done = np.zeros(n, dtype=bool)

    for _ in range(n_iter):
        psum = np.exp(-shifted / mid[:, None]).sum(axis=1)
        done |= np.abs(psum - target) < SMOOTH_K_TOLERANCE
        if done.all():
            break
        high = (psum > target) & ~done
        low = (psum <= target) & ~done
        hi[high] = mid[high]
        mid[high] = (lo[high] + hi[high]) / 2.0
        lo[low] = mid[low]
        unbounded = low & ~np.isfinite(hi)
        mid[unbounded] *= 2.0
        bounded = low & np.isfinite(hi)
        mid[bounded] = (lo[bounded] + hi[bounded]) / 2.0

    mean_all = distances.mean()
    floor = np.where(rho > 0.0, MIN_K_DIST_SCALE * distances.mean(axis=1), MIN_K_DIST_SCALE * mean_all)
    return np.maximum(mid, floor), rho


def fuzzy_simplicial_set(features: np.ndarray, n_neighbors: int) -> scipy.sparse.csr_matrix:
    """Symmetric membership graph: the fuzzy union A + A^T - A * A^T of the directed k-NN sets."""
    n = features.shape[0]
    knn = NearestNeighbors(n_neighbors=n_neighbors + 1, algorithm="brute", metric="euclidean")
    knn.fit(features)
    dists, indices = knn.kneighbors(features)

    sigmas, rhos = smooth_knn_dist(dists, float(n_neighbors))

    vals = np.exp(-np.maximum(dists - rhos[:, None], 0.0) / sigmas[:, None])
    vals[indices == np.arange(n)[:, None]] = 0.0

    rows = np.repeat(np.arange(n), indices.shape[1])
    graph = scipy.sparse.coo_matrix((vals.ravel(), (rows, indices.ravel())), shape=(n, n)).tocsr()
    graph.eliminate_zeros()

    transpose = graph.transpose()
    union = graph + transpose - graph.multiply(transpose)
    union = scipy.sparse.csr_matrix(union)
    union.eliminate_zeros()
    return union


def make_epochs_per_sample(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    """Epochs between samples of each edge; the strongest edge is sampled every epoch."""
    result = -np.ones(weights.shape[0], dtype=np.float64)
    n_samples = n_epochs * (weights / weights.max())
    result[n_samples > 0] = float(n_epochs) / n_samples[n_samples > 0]
    return result


def _clip(grad: np.ndarray) -> np.ndarray:
    return np.clip(grad, -GRADIENT_CLIP, GRADIENT_CLIP)


def optimize_layout(
    embedding: np.ndarray,
    head: np.ndarray,
    tail: np.ndarray,
    epochs_per_sample: np.ndarray,
    a: float,
    b: float,
    params: EmbedParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Negative-sampling SGD on the cross-entropy between the graph and the layout.

    Each epoch gathers every edge due for sampling, applies its attractive
    move to both endpoints and its repulsive moves against uniformly drawn
    points, with all moves of the epoch computed from the same snapshot.
    """
    n = embedding.shape[0]
    epochs_per_negative = epochs_per_sample / params.negative_sample_rate
    next_sample = epochs_per_sample.copy()
    next_negative = epochs_per_negative.copy()

    for epoch in range(params.n_epochs):
        alpha = params.learning_rate * (1.0 - epoch / params.n_epochs)
        active = np.flatnonzero(next_sample <= epoch)
        if active.size == 0:
            continue

        h, t = head[active], tail[active]
        diff = embedding[h] - embedding[t]
        dist_sq = (diff ** 2).sum(axis=1)
        coeff = np.zeros_like(dist_sq)
        pos = dist_sq > 0.0
        coeff[pos] = (-2.0 * a * b * dist_sq[pos] ** (b - 1.0)) / (a * dist_sq[pos] ** b + 1.0)
        grad = _clip(coeff[:, None] * diff) * alpha

        delta = np.zeros_like(embedding)
        np.add.at(delta, h, grad)
        np.add.at(delta, t, -grad)
        next_sample[active] += epochs_per_sample[active]

        n_neg = ((epoch - next_negative[active]) / epochs_per_negative[active]).astype(int)
        n_neg = np.maximum(n_neg, 0)
        if n_neg.sum():
            neg_head = np.repeat(h, n_neg)
            neg_tail = rng.integers(0, n, size=neg_head.size)
            diff = embedding[neg_head] - embedding[neg_tail]
            dist_sq = (diff ** 2).sum(axis=1)
            coeff = (2.0 * b) / ((REPULSION_EPSILON + dist_sq) * (a * dist_sq ** b + 1.0))
            grad = np.where(dist_sq[:, None] > 0.0, _clip(coeff[:, None] * diff), GRADIENT_CLIP)
            grad[neg_head == neg_tail] = 0.0
            np.add.at(delta, neg_head, grad * alpha)
        next_negative[active] += n_neg * epochs_per_negative[active]

        embedding += delta

    return embedding


def embed_2d(features: Sequence[Sequence[float]], params: Optional[EmbedParams] = None, seed: int = 0) -> np.ndarray:
    """
    Project z-scored feature vectors to 2-D.

    Returns an (n, 2) array; identical seeds give identical coordinates.

    Raises:
        StatsPreconditionError: fewer than n_neighbors + 1 points, or non-finite features
    """
    params = params or EmbedParams()
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[0] < params.n_neighbors + 1:
        raise StatsPreconditionError(
            f"embedding needs at least {params.n_neighbors + 1} points, got {x.shape[0] if x.ndim else 0}"
        )
    if not np.all(np.isfinite(x)):
        raise StatsPreconditionError("embedding features must be finite")

    logger.info(f"Embedding {x.shape[0]} points ({x.shape[1]} features, k={params.n_neighbors})")
    graph = fuzzy_simplicial_set(x, params.n_neighbors).tocoo()
    graph.data[graph.data < graph.data.max() / float(params.n_epochs)] = 0.0
    graph.eliminate_zeros()

    a, b = find_ab_params(params.spread, params.min_dist)
    logger.debug(f"Layout curve a={a:.4f} b={b:.4f}; {graph.nnz} edges")

    rng = np.random.default_rng(seed)
    embedding = rng.uniform(-INIT_RANGE, INIT_RANGE, size=(x.shape[0], 2))
    epochs_per_sample = make_epochs_per_sample(graph.data, params.n_epochs)
    return optimize_layout(embedding, graph.row, graph.col, epochs_per_sample, a, b, params, rng)


def dbscan(points: Sequence[Sequence[float]], params: Optional[ClusterParams] = None) -> np.ndarray:
    """Density clustering of embedded points; noise is labelled -1."""
    params = params or ClusterParams()
    x = np.asarray(points, dtype=float)
    if x.shape[0] == 0:
        return np.zeros(0, dtype=int)
    labels = DBSCAN(eps=params.eps, min_samples=params.min_samples, metric="euclidean").fit(x).labels_

    n_clusters = len(set(labels)) - (1 if -1 in labels else 0)
    n_noise = int((labels == -1).sum())
    if n_clusters == 0:
        logger.warning(f"DBSCAN found no clusters among {x.shape[0]} points (eps={params.eps})")
    else:
        logger.info(f"DBSCAN: {n_clusters} clusters, {n_noise} noise points")
    return labels


def neighbor_preservation(high: np.ndarray, low: np.ndarray, k: int = 5) -> float:
    """Mean fraction of each point's k nearest neighbours in `high` that stay among its k nearest in `low`."""
    def knn_sets(data):
        _, idx = NearestNeighbors(n_neighbors=k + 1).fit(data).kneighbors(data)
        return idx[:, 1:]

    high_nn, low_nn = knn_sets(np.asarray(high, float)), knn_sets(np.asarray(low, float))
    shared = [len(set(h) & set(l)) / k for h, l in zip(high_nn, low_nn)]
    return float(np.mean(shared))
