"""Self-supervision label spaces built from sound textures.

Clustering model: k-means centroid index with outlier pruning.
Binary model: thresholded projections onto the top principal components.
Spectrum model: short-window cochlear channel means.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy import linalg as sp_linalg
from scipy.spatial.distance import cdist

from .config import RESCALE_MODES
from .dsp_core import Cochleagram, CochlearFilterBank, Waveform, cochleagram
from .exceptions import ConvergenceError, InvalidConfigError, InvalidInputError, OutOfRangeError

logger = logging.getLogger(__name__)

SPECTRUM_WINDOW_S = 1.0 / 30.0
TIE_RTOL = 1e-9
INERTIA_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray
    inertia: float
    iterations_run: int
    seed: int
    inertia_history: List[float] = field(default_factory=list)
    # group rescaling of the clustered texture vectors, when known
    feature_rescale: Optional[str] = None

    def __post_init__(self):
        if self.k < 2:
            raise InvalidConfigError(f"k must be at least 2, got {self.k}")
        if self.feature_rescale is not None and self.feature_rescale not in RESCALE_MODES:
            raise InvalidConfigError(f"feature_rescale must be one of {RESCALE_MODES}, got {self.feature_rescale!r}")
        if self.centroids.shape[0] != self.k or not np.all(np.isfinite(self.centroids)):
            raise InvalidInputError("centroids must be a finite k x d matrix")
        if self.inertia < 0:
            raise InvalidInputError("inertia must be non-negative")

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    sign_convention: str = "max-abs-positive"

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True, eq=False)
class Label:
    kind: str
    cluster_id: Optional[int] = None
    code: Optional[np.ndarray] = None
    spectrum: Optional[np.ndarray] = None
    pruned: bool = False

    def __post_init__(self):
        payloads = {"cluster": self.cluster_id, "binary": self.code, "spectrum": self.spectrum}
        if self.kind not in payloads:
            raise InvalidInputError(f"unknown label kind {self.kind!r}")
        present = [name for name, value in payloads.items() if value is not None]
        if present != [self.kind]:
            raise InvalidInputError(f"{self.kind} label must carry exactly its own payload, got {present}")


def _as_matrix(X: np.ndarray, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains non-finite rows")
    return X


def _kmeans_plusplus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    closest = cdist(X, X[chosen], "sqeuclidean")[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a centroid already
            idx = int(rng.integers(n))
        chosen.append(idx)
        closest = np.minimum(closest, cdist(X, X[idx:idx + 1], "sqeuclidean")[:, 0])
    return X[chosen].copy()


def _nearest(X: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    d2 = cdist(X, centroids, "sqeuclidean")
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(X.shape[0]), labels]


def kmeans_fit(
    X: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> ClusterModel:
    """Lloyd's algorithm from a seeded k-means++ start."""
    X = _as_matrix(X)
    n = X.shape[0]
    if k < 2:
        raise InvalidConfigError(f"k must be at least 2, got {k}")
    if n < k:
        raise InvalidInputError(f"need at least k={k} rows, got {n}")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_plusplus(X, k, rng)
    history: List[float] = []
    iterations = 0

    for iterations in range(1, max_iter + 1):
        labels, d2 = _nearest(X, centroids)
        inertia = float(d2.sum())
        if history and inertia > history[-1] * (1.0 + INERTIA_RTOL) + 1e-300:
            raise ConvergenceError(
                f"k-means inertia increased from {history[-1]:.6g} to {inertia:.6g} at iteration {iterations}"
            )
        improvement = (history[-1] - inertia) / history[-1] if history and history[-1] > 0 else np.inf
        history.append(inertia)
        logger.debug(f"k-means iteration {iterations}: inertia={inertia:.6g}")
        if inertia == 0.0 or improvement <= tol:
            break
        if iterations == max_iter:
            break

        new_centroids = centroids.copy()
        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts):
            new_centroids[j] = X[labels == j].mean(axis=0)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            # reseed each empty cluster at the worst-fit point not already used
            order = np.argsort(-d2, kind="stable")
            for j, idx in zip(empty, order[:empty.size]):
                new_centroids[j] = X[idx]
            logger.debug(f"Reseeded {empty.size} empty clusters")
        centroids = new_centroids

    logger.info(f"k-means k={k} finished after {iterations} iterations, inertia={history[-1]:.6g}")
    return ClusterModel(
        k=k,
        centroids=centroids,
        inertia=history[-1],
        iterations_run=iterations,
        seed=seed,
        inertia_history=history,
    )


def assign(model: ClusterModel, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels and Euclidean distances (ties go to the lowest index)."""
    X = _as_matrix(X)
    if X.shape[1] != model.dim:
        raise InvalidInputError(f"expected {model.dim} columns, got {X.shape[1]}")
    labels, d2 = _nearest(X, model.centroids)
    return labels, np.sqrt(d2)


def prune_outliers(
    labels: np.ndarray, distances: np.ndarray, scope: str = "per-cluster"
) -> np.ndarray:
    """Flag examples farther from their centroid than the median distance.

    ``scope`` picks the median: per cluster, over the whole dataset, or
    ``"off"`` to flag nothing.
    """
    labels = np.asarray(labels)
    distances = np.asarray(distances, dtype=np.float64)
    if labels.shape != distances.shape:
        raise InvalidInputError("labels and distances must be aligned")
    pruned = np.zeros(labels.shape, dtype=bool)
    if scope == "off" or labels.size == 0:
        return pruned
    if scope == "global":
        return distances > np.median(distances)
    if scope != "per-cluster":
        raise InvalidConfigError(f"unknown prune scope {scope!r}")
    for cluster in np.unique(labels):
        members = labels == cluster
        pruned[members] = distances[members] > np.median(distances[members])
    return pruned


def _canonical_signs(components: np.ndarray) -> np.ndarray:
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(components.shape[0]), pivots])
    signs[signs == 0] = 1.0
    return components * signs[:, np.newaxis]


def pca_fit(X: np.ndarray, n_components: int = 30) -> PcaModel:
    """Top principal directions from a dense symmetric eigendecomposition."""
    X = _as_matrix(X)
    n, d = X.shape
    if n_components < 1 or n_components > d:
        raise InvalidConfigError(f"n_components must be in [1, {d}], got {n_components}")
    if n < n_components + 1:
        raise InvalidInputError(f"need at least {n_components + 1} rows for {n_components} components, got {n}")

    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    values, vectors = sp_linalg.eigh(cov, subset_by_index=[d - n_components, d - 1])
    order = np.argsort(values, kind="stable")[::-1]
    values = np.clip(values[order], 0.0, None)
    components = _canonical_signs(vectors[:, order].T)

    logger.info(f"PCA fit on {n} x {d}: top variance {values[0]:.6g}, "
                f"component {n_components} variance {values[-1]:.6g}")
    return PcaModel(mean=mean, components=components, explained_variance=values)


def project(X: np.ndarray, model: PcaModel) -> np.ndarray:
    """Centered projections onto the principal components."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.dim:
        raise InvalidInputError(f"expected dimension {model.dim}, got {X.shape[-1]}")
    return (X - model.mean) @ model.components.T


def binary_encode(x: np.ndarray, model: PcaModel) -> np.ndarray:
    """Bit i is 1 iff the centered projection on component i is positive.

    Projections within rounding noise of zero count as ties and map to 0.
    Accepts one vector or a matrix of row vectors.
    """
    x = np.asarray(x, dtype=np.float64)
    projections = project(x, model)
    tol = TIE_RTOL * np.asarray(np.linalg.norm(x - model.mean, axis=-1))[..., np.newaxis]
    return (projections > tol).astype(np.uint8)


def code_to_string(code: np.ndarray) -> str:
    """Bits as a 0/1 string, component 0 first."""
    return "".join("1" if bit else "0" for bit in code)


def code_to_int(code: np.ndarray) -> int:
    """Bits read as a big-endian integer."""
    return int(code_to_string(code), 2) if len(code) else 0


def spectrum_from_cochleagram(
    c: Cochleagram, t_center: float, window_s: float = SPECTRUM_WINDOW_S
) -> np.ndarray:
    """Mean of each compressed channel over a short window centered at ``t_center``."""
    half = window_s / 2.0
    if t_center - half < -1e-9 or t_center + half > c.duration_s + 1e-9:
        raise OutOfRangeError(
            f"spectrum window at {t_center:g} s does not fit in a {c.duration_s:g} s clip"
        )
    n_win = max(1, int(round(window_s * c.env_rate)))
    center = int(round(t_center * c.env_rate))
    start = min(max(center - n_win // 2, 0), c.n_frames - n_win)
    start = max(start, 0)
    return c.envelopes[:, start:start + n_win].mean(axis=1)


def spectrum_feature(
    w: Waveform,
    bank: CochlearFilterBank,
    t_center: float,
    window_s: float = SPECTRUM_WINDOW_S,
) -> np.ndarray:
    """Spectrum label of one short window, computed from the waveform."""
    half = window_s / 2.0
    if t_center - half < -1e-9 or t_center + half > w.duration_s + 1e-9:
        raise OutOfRangeError(
            f"spectrum window at {t_center:g} s does not fit in a {w.duration_s:g} s clip"
        )
    return spectrum_from_cochleagram(cochleagram(w, bank), t_center, window_s)


@dataclass(frozen=True, eq=False)
class SweepResult:
    k: int
    model: ClusterModel
    retained_count: int
    cluster_sizes: np.ndarray


def cluster_count_sweep(
    X: np.ndarray,
    ks: Sequence[int],
    seed: int = 0,
    scope: str = "per-cluster",
    n_restarts: int = 1,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> List[SweepResult]:
    """k-means + pruning for each k; the best of ``n_restarts`` seeds is kept."""
    X = _as_matrix(X)
    n = X.shape[0]
    for k in ks:
        if k < 2 or k > n:
            raise InvalidInputError(f"every k must be in [2, {n}], got {k}")
    if n_restarts < 1:
        raise InvalidConfigError("n_restarts must be at least 1")

    results = []
    for k in ks:
        best = None
        for restart in range(n_restarts):
            model = kmeans_fit(X, k, seed=seed + restart, max_iter=max_iter, tol=tol)
            if best is None or model.inertia < best.inertia:
                best = model
        labels, distances = assign(best, X)
        pruned = prune_outliers(labels, distances, scope)
        results.append(SweepResult(
            k=k,
            model=best,
            retained_count=int((~pruned).sum()),
            cluster_sizes=np.bincount(labels, minlength=k),
        ))
        logger.info(f"sweep k={k}: inertia={best.inertia:.6g}, retained {int((~pruned).sum())}/{n}")
    return results


def nearest_to_centroid(
    model: ClusterModel,
    X: np.ndarray,
    clip_ids: Sequence[str],
    cluster: int,
    n: int = 5,
    one_per_clip: bool = True,
) -> List[int]:
    """Row indices of the ``n`` examples closest to a centroid, nearest first."""
    if not 0 <= cluster < model.k:
        raise OutOfRangeError(f"cluster {cluster} out of range for k={model.k}")
    X = _as_matrix(X)
    if len(clip_ids) != X.shape[0]:
        raise InvalidInputError("clip_ids must align with the rows of X")
    distances = cdist(X, model.centroids[cluster:cluster + 1])[:, 0]
    picked, seen = [], set()
    for idx in np.argsort(distances, kind="stable"):
        if one_per_clip and clip_ids[idx] in seen:
            continue
        picked.append(int(idx))
        seen.add(clip_ids[idx])
        if len(picked) == n:
            break
    return picked


def cluster_labels(labels: np.ndarray, pruned: np.ndarray) -> List[Label]:
    return [Label(kind="cluster", cluster_id=int(c), pruned=bool(p)) for c, p in zip(labels, pruned)]


def binary_labels(codes: np.ndarray) -> List[Label]:
    return [Label(kind="binary", code=np.asarray(code, dtype=np.uint8)) for code in codes]


def spectrum_labels(spectra: np.ndarray) -> List[Label]:
    return [Label(kind="spectrum", spectrum=np.asarray(row, dtype=np.float64)) for row in spectra]
