"""K-means clustering and 2-D principal-component projection of latent features."""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, UndefinedStatisticError

MAX_ITER = 300


@dataclass(frozen=True)
class LatentMatrix:
    symbols: tuple
    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] != len(self.symbols):
            raise ConfigurationError(f"{len(self.symbols)} symbols but rows of shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ConfigurationError("latent matrix contains non-finite values")
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "rows", rows)


@dataclass
class ClusterAssignment:
    k: int
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    empty_reseeds: int = 0
    inertia_history: list = field(default_factory=list)


@dataclass
class Embedding2D:
    coordinates: np.ndarray
    explained_variance_ratio: np.ndarray
    eigenvalues: np.ndarray = None


def _points(points):
    return points.rows if isinstance(points, LatentMatrix) else np.asarray(points, dtype=np.float64)


def _sq_dists(x, centroids):
    # explicit differences keep exact zeros for coincident points
    diff = x[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeans_pp(x, k, rng):
    n = len(x)
    centroids = [x[rng.integers(n)]]
    closest = _sq_dists(x, np.array(centroids))[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total == 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest / total)
        centroids.append(x[idx])
        closest = np.minimum(closest, _sq_dists(x, x[idx][None])[:, 0])
    return np.array(centroids)


def _lloyd(x, centroids, max_iter):
    k = len(centroids)
    labels = None
    history = []
    reseeds = 0
    for _ in range(max_iter):
        d = _sq_dists(x, centroids)
        new_labels = d.argmin(axis=1)
        history.append(float(d[np.arange(len(x)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centroids = centroids.copy()
        point_d = d[np.arange(len(x)), labels]
        for c in range(k):
            members = labels == c
            if members.any():
                centroids[c] = x[members].mean(axis=0)
            else:
                # empty cluster: move it onto the point farthest from its centroid
                far = int(point_d.argmax())
                centroids[c] = x[far]
                point_d[far] = 0.0
                reseeds += 1
    d = _sq_dists(x, centroids)
    labels = d.argmin(axis=1)
    inertia = float(d[np.arange(len(x)), labels].sum())
    return labels, centroids, inertia, history, reseeds


def kmeans(points, k, seed=0, restarts=10, max_iter=MAX_ITER) -> ClusterAssignment:
    """Lloyd's algorithm from k-means++ seeds; keeps the lowest-inertia restart."""
    x = _points(points)
    n = len(x)
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    if k > n:
        raise ConfigurationError(f"k={k} exceeds the number of points ({n})")
    if restarts < 1:
        raise ConfigurationError("restarts must be >= 1")
    distinct = len(np.unique(x, axis=0))
    if distinct < k:
        warnings.warn(f"only {distinct} distinct points for k={k}; empty clusters will be reseeded",
                      RuntimeWarning, stacklevel=2)

    seeds = np.random.SeedSequence(seed).spawn(restarts)
    best = None
    for ss in seeds:
        rng = np.random.default_rng(ss)
        labels, centroids, inertia, history, reseeds = _lloyd(x, _kmeans_pp(x, k, rng), max_iter)
        if best is None or inertia < best.inertia:
            best = ClusterAssignment(k, labels, centroids, inertia, reseeds, history)
    return best


def jacobi_eigh(a, tol=1e-15, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues in descending order and the matching eigenvectors as
    columns.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.abs(a).sum() or 1.0
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def pca_2d(points) -> Embedding2D:
    """Project mean-centred points onto the two leading covariance eigenvectors.

    Each component's sign is fixed so that its largest-magnitude loading is
    positive.
    """
    x = _points(points)
    if x.shape[0] < 2:
        raise ConfigurationError("PCA needs at least 2 points")
    if x.shape[1] < 2:
        raise ConfigurationError("PCA needs at least 2 features")
    centred = x - x.mean(axis=0)
    cov = centred.T @ centred / (x.shape[0] - 1)
    total = float(np.trace(cov))
    if total <= 0:
        raise UndefinedStatisticError("all points are identical; no variance to project")
    w, v = jacobi_eigh(cov)
    w = np.clip(w, 0.0, None)
    comps = v[:, :2].copy()
    for j in range(2):
        if comps[np.argmax(np.abs(comps[:, j])), j] < 0:
            comps[:, j] = -comps[:, j]
    return Embedding2D(centred @ comps, w[:2] / w.sum(), w)


def silhouette(points, labels) -> float:
    """Mean silhouette coefficient; singleton clusters score 0."""
    x = _points(points)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2 or len(uniq) >= len(x):
        raise ConfigurationError("silhouette needs 2 <= clusters < points")
    d = np.sqrt(_sq_dists(x, x))
    scores = np.zeros(len(x))
    for i in range(len(x)):
        own = labels == labels[i]
        if own.sum() == 1:
            continue
        a = d[i, own].sum() / (own.sum() - 1)
        b = min(d[i, labels == c].mean() for c in uniq if c != labels[i])
        m = max(a, b)
        scores[i] = 0.0 if m == 0 else (b - a) / m
    return float(scores.mean())


def select_k(points, k_range=range(2, 7), seed=0, restarts=10) -> int:
    """Cluster count with the highest mean silhouette; ties go to the smaller k.

    Values of ``k`` outside ``[2, n - 1]`` are dropped from the range.
    """
    x = _points(points)
    ks = [k for k in k_range if 2 <= k <= len(x) - 1]
    if not ks:
        raise ConfigurationError(f"no admissible k in {list(k_range)} for {len(x)} points")
    best_k, best_s = None, -np.inf
    for k in ks:
        result = kmeans(x, k, seed, restarts)
        if len(np.unique(result.labels)) < 2:
            continue
        s = silhouette(x, result.labels)
        if s > best_s:
            best_k, best_s = k, s
    return best_k if best_k is not None else ks[0]


def cluster_csv(symbols, assignment: ClusterAssignment, embedding: Embedding2D):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["symbol", "label", "pc1", "pc2"])
    for sym, lab, (p1, p2) in zip(symbols, assignment.labels, embedding.coordinates):
        w.writerow([sym, int(lab), repr(float(p1)), repr(float(p2))])
    return buf.getvalue()


def cluster_summary(assignment: ClusterAssignment, embedding: Embedding2D, **extra):
    return json.dumps({
        "k": assignment.k,
        "inertia": assignment.inertia,
        "centroids": assignment.centroids.tolist(),
        "explained_variance_ratio": embedding.explained_variance_ratio.tolist(),
        **extra,
    }, indent=2, sort_keys=True)
