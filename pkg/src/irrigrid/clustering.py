"""K-means over 12-month NDVI signatures and the cluster-quality indices used to pick k."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

log = logging.getLogger(__name__)

MAX_ITER = 300
N_INIT = 5
DEFAULT_K_RANGE = (2, 6)
# silhouette is quadratic in n; above this it is computed on a seeded sample
SILHOUETTE_SAMPLE = 10_000


class UndefinedMetricError(ValueError):
    """A quality index was requested for fewer than two non-empty clusters."""


class InvalidModelError(ValueError):
    """The clustering is degenerate for the requested index (e.g. coincident centroids)."""


class ModelSelectionError(ValueError):
    """No k in the requested range produced a usable model."""


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    seed: int
    inertia_history: tuple[float, ...] = ()
    n_iter: int = 0

    def predict(self, points) -> np.ndarray:
        return _assign(np.asarray(points, dtype=float), self.centroids)[0]


@dataclass(frozen=True)
class ClusterQuality:
    silhouette: float
    calinski_harabasz: float
    davies_bouldin: float


@dataclass(frozen=True)
class KScore:
    """Quality of the best restart for one k. ``error`` is set when an index is undefined."""

    k: int
    inertia: float
    silhouette: float | None = None
    calinski_harabasz: float | None = None
    davies_bouldin: float | None = None
    error: str | None = None

    def as_dict(self) -> dict:
        return {"k": self.k, "inertia": self.inertia, "silhouette": self.silhouette,
                "calinski_harabasz": _json_float(self.calinski_harabasz),
                "davies_bouldin": self.davies_bouldin, "error": self.error}


@dataclass(frozen=True, eq=False)
class Selection:
    model: ClusterModel
    scores: tuple[KScore, ...]
    sample_size: int
    models: dict = field(default_factory=dict, repr=False)

    @property
    def quality(self) -> ClusterQuality:
        s = next(s for s in self.scores if s.k == self.model.k)
        return ClusterQuality(s.silhouette, s.calinski_harabasz, s.davies_bouldin)


def _json_float(x):
    if x is None or np.isfinite(x):
        return x
    return "inf"


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return cdist(points, centroids, "sqeuclidean")


def _assign(points, centroids):
    d2 = _sq_dists(points, centroids)
    labels = d2.argmin(axis=1)
    return labels, d2[np.arange(len(points)), labels]


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(points, points[chosen]).ravel()
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            cum = np.cumsum(d2)
            idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        d2 = np.minimum(d2, _sq_dists(points, points[idx:idx + 1]).ravel())
    return points[chosen].copy()


def _update(points, labels, centroids, k):
    # bincount sums in point order, so the result does not depend on scheduling
    counts = np.bincount(labels, minlength=k)
    dim = points.shape[1]
    flat = (labels[:, None] * dim + np.arange(dim)).ravel()
    sums = np.bincount(flat, weights=points.ravel(), minlength=k * dim).reshape(k, dim)
    new = centroids.copy()
    filled = counts > 0
    new[filled] = sums[filled] / counts[filled, None]
    empty = np.flatnonzero(~filled)
    if empty.size:
        # reseed each empty cluster at the point farthest from its own centroid
        d2 = np.einsum("nd,nd->n", points - new[labels], points - new[labels])
        for j in empty:
            far = int(d2.argmax())
            new[j] = points[far]
            d2[far] = -1.0
    return new


def kmeans_fit(points, k: int, seed: int, max_iter: int = MAX_ITER) -> ClusterModel:
    """Lloyd's algorithm from a seeded k-means++ start.

    Stops when no assignment changes or after ``max_iter`` updates. The result
    depends only on ``(points, k, seed)``.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"points must be 2-D, got shape {X.shape}")
    n = len(X)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    if np.isnan(X).any():
        raise ValueError("points contain nodata")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(X, k, rng)
    labels, d2 = _assign(X, centroids)
    history = [float(d2.sum())]
    n_iter = 0
    converged = False
    while n_iter < max_iter:
        centroids = _update(X, labels, centroids, k)
        new_labels, d2 = _assign(X, centroids)
        history.append(float(d2.sum()))
        n_iter += 1
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
    if not converged:
        centroids = _update(X, labels, centroids, k)
        labels, d2 = _assign(X, centroids)
        history.append(float(d2.sum()))
    return ClusterModel(k, centroids, labels, float(d2.sum()), seed, tuple(history), n_iter)


def _labels_of(model_or_labels) -> np.ndarray:
    labels = getattr(model_or_labels, "assignments", model_or_labels)
    return np.asarray(labels)


def _clusters(points, model_or_labels):
    X = np.asarray(points, dtype=np.float64)
    labels = _labels_of(model_or_labels)
    if len(labels) != len(X):
        raise ValueError(f"{len(labels)} labels for {len(X)} points")
    ids, inv = np.unique(labels, return_inverse=True)
    if len(ids) < 2:
        raise UndefinedMetricError(f"quality indices need >= 2 non-empty clusters, got {len(ids)}")
    return X, inv.ravel(), len(ids)


def silhouette(points, model, chunk: int = 1024) -> float:
    """Mean silhouette coefficient over all points (Euclidean)."""
    X, lab, k = _clusters(points, model)
    n = len(X)
    counts = np.bincount(lab, minlength=k)
    sums = np.empty((n, k))
    for start in range(0, n, chunk):
        d = cdist(X[start:start + chunk], X)
        for j in range(k):
            sums[start:start + chunk, j] = d[:, lab == j].sum(axis=1)
    own = counts[lab]
    idx = np.arange(n)
    with np.errstate(invalid="ignore", divide="ignore"):
        a = sums[idx, lab] / (own - 1)
        mean_other = sums / counts
    mean_other[idx, lab] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[own == 1] = 0.0
    return float(s.mean())


def _centroids(X, lab, k):
    return np.stack([X[lab == j].mean(axis=0) for j in range(k)])


def calinski_harabasz(points, model) -> float:
    """Between/within dispersion ratio; ``inf`` when every cluster is a single location."""
    X, lab, k = _clusters(points, model)
    n = len(X)
    cents = _centroids(X, lab, k)
    counts = np.bincount(lab, minlength=k)
    overall = X.mean(axis=0)
    between = float((counts * ((cents - overall) ** 2).sum(axis=1)).sum())
    within = float(((X - cents[lab]) ** 2).sum())
    if within == 0.0:
        return float("inf")
    return between * (n - k) / (within * (k - 1))


def davies_bouldin(points, model) -> float:
    X, lab, k = _clusters(points, model)
    cents = _centroids(X, lab, k)
    spread = np.array([np.sqrt(((X[lab == j] - cents[j]) ** 2).sum(axis=1)).mean()
                       for j in range(k)])
    sep = cdist(cents, cents)
    np.fill_diagonal(sep, np.inf)
    if (sep == 0).any():
        raise InvalidModelError("two clusters share a centroid")
    ratio = (spread[:, None] + spread[None, :]) / sep
    return float(ratio.max(axis=1).mean())


def quality(points, model) -> ClusterQuality:
    return ClusterQuality(silhouette(points, model), calinski_harabasz(points, model),
                          davies_bouldin(points, model))


def restart_seed(seed: int, k: int, restart: int) -> int:
    return int(np.random.SeedSequence([seed, k, restart]).generate_state(1)[0])


def fit_best(points, k: int, seed: int, n_init: int = N_INIT) -> ClusterModel:
    """Lowest-inertia model over ``n_init`` seeded restarts (first wins ties)."""
    best = None
    for r in range(n_init):
        m = kmeans_fit(points, k, restart_seed(seed, k, r))
        if best is None or m.inertia < best.inertia:
            best = m
    return best


def select_model(points, k_range=DEFAULT_K_RANGE, seed: int = 0, n_init: int = N_INIT,
                 sample: int = SILHOUETTE_SAMPLE) -> Selection:
    """Fit every k in ``k_range`` (inclusive) and keep the one with the best silhouette.

    Ties go to the lower Davies-Bouldin index, then to the smaller k. A k whose
    indices are undefined is recorded and skipped.
    """
    k_lo, k_hi = k_range
    X = np.asarray(points, dtype=np.float64)
    n = len(X)
    if k_lo < 2 or k_hi < k_lo:
        raise ValueError(f"invalid k range {k_range}; need 2 <= k_lo <= k_hi")
    if n <= k_hi:
        raise ValueError(f"need more than k_hi={k_hi} points, got {n}")
    if n > sample:
        pick = np.sort(np.random.default_rng(seed).choice(n, size=sample, replace=False))
    else:
        pick = None
    scores, models = [], {}
    for k in range(k_lo, k_hi + 1):
        m = fit_best(X, k, seed, n_init)
        models[k] = m
        try:
            sil = silhouette(X[pick], m.assignments[pick]) if pick is not None else silhouette(X, m)
            ch = calinski_harabasz(X, m)
            db = davies_bouldin(X, m)
        except (UndefinedMetricError, InvalidModelError) as exc:
            scores.append(KScore(k, m.inertia, error=str(exc)))
            log.debug("k=%d skipped: %s", k, exc)
            continue
        scores.append(KScore(k, m.inertia, sil, ch, db))
    usable = [s for s in scores if s.error is None]
    if not usable:
        raise ModelSelectionError(
            f"no k in {k_range} gave defined quality indices: {scores[0].error}")
    best = min(usable, key=lambda s: (-s.silhouette, s.davies_bouldin, s.k))
    return Selection(models[best.k], tuple(scores), n if pick is None else sample, models)
