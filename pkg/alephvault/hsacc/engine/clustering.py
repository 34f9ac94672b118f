import logging
from typing import Callable, List, Optional, Tuple
import numpy as np
import torch
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import kmeans_plusplus
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score
from sklearn.metrics.cluster import contingency_matrix
from ..core.seeds import derive_seed, KMEANS
from ..types.dataset import MultiViewDataset, AvailabilityMask
from ..types.reports import ClusteringReport, KMeansFit
from ..types.training import TrainConfig
from .dataio import masked_views
from .completion import infer_all, complete_latents


_logger = logging.getLogger(__name__ + ":logger")


def _squared_distances(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    distances = (x ** 2).sum(axis=1)[:, None] + (centers ** 2).sum(axis=1)[None, :] - 2 * x @ centers.T
    return np.maximum(distances, 0.0)


def _reseed_empty(x: np.ndarray, labels: np.ndarray, centers: np.ndarray, k: int) -> np.ndarray:
    """
    Moves each empty cluster onto the point farthest from its own center
    (each point can be taken once). Returns the (updated) labels.
    """

    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    if counts.all():
        return labels
    own = ((x - centers[labels]) ** 2).sum(axis=1)
    for cluster in np.flatnonzero(counts == 0):
        # Never empty another cluster while filling this one.
        movable = np.bincount(labels, minlength=k)[labels] > 1
        candidates = np.where(movable, own, -np.inf)
        farthest = int(np.argmax(candidates))
        labels[farthest] = cluster
        centers[cluster] = x[farthest]
        own[farthest] = 0.0
    return labels


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    k = centers.shape[0]
    labels = _squared_distances(x, centers).argmin(axis=1)
    for _ in range(max_iter):
        labels = _reseed_empty(x, labels, centers, k)
        updated = np.stack([x[labels == cluster].mean(axis=0) for cluster in range(k)])
        shift = np.sqrt(((updated - centers) ** 2).sum(axis=1)).max()
        centers = updated
        labels = _squared_distances(x, centers).argmin(axis=1)
        if shift < tol:
            break
    labels = _reseed_empty(x, labels, centers, k)
    return labels, centers


def kmeans(x: np.ndarray, k: int, restarts: int = 50, seed: int = 0, max_iter: int = 300,
           tol: float = 1e-4) -> KMeansFit:
    """
    Lloyd's algorithm with k-means++ seeding, keeping the best of several
    restarts by inertia (ties go to the earliest restart). The returned
    centers are the means of the returned clusters, and the inertia is
    computed out of them.
    :param x: The N x d points.
    :param k: The number of clusters.
    :param restarts: The number of restarts.
    :param seed: The seed of the whole procedure.
    :param max_iter: The maximum Lloyd iterations per restart.
    :param tol: The center-shift convergence threshold.
    :return: The best fit.
    """

    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"Expected an N x d matrix, got shape {x.shape}")
    if k < 1 or x.shape[0] < k:
        raise ValueError(f"k-means needs N >= k >= 1, got N={x.shape[0]}, k={k}")
    if restarts < 1:
        raise ValueError(f"At least one restart is needed, got {restarts}")

    restart_seeds = np.random.default_rng(seed).integers(0, 2 ** 31 - 1, size=restarts)
    best = None
    for restart, restart_seed in enumerate(restart_seeds):
        centers, _ = kmeans_plusplus(x, k, random_state=int(restart_seed))
        labels, _ = _lloyd(x, centers.copy(), max_iter, tol)
        centers = np.stack([x[labels == cluster].mean(axis=0) for cluster in range(k)])
        inertia = float(((x - centers[labels]) ** 2).sum())
        if best is None or inertia < best.inertia:
            best = KMeansFit(labels.astype(np.int64), centers, inertia, restart)
    _logger.debug(f"k-means (k={k}): best inertia {best.inertia:.6g} at restart {best.restart}")
    return best


def _check_labels(pred, truth) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} predicted labels, {truth.shape[0]} true labels")
    if pred.size == 0:
        raise ValueError("Cannot score empty labelings")
    return pred, truth


def clustering_accuracy(pred, truth) -> float:
    """
    The fraction of samples matched under the best one-to-one assignment
    of clusters to classes (Hungarian algorithm on the contingency table).
    """

    pred, truth = _check_labels(pred, truth)
    contingency = contingency_matrix(truth, pred)
    rows, cols = linear_sum_assignment(-contingency)
    return float(contingency[rows, cols].sum() / pred.size)


def nmi(pred, truth) -> float:
    """
    Normalized mutual information (arithmetic mean of the entropies). When
    both labelings have a single group, it is 0.
    """

    pred, truth = _check_labels(pred, truth)
    if np.unique(pred).size == 1 and np.unique(truth).size == 1:
        return 0.0
    return float(normalized_mutual_info_score(truth, pred, average_method="arithmetic"))


def ari(pred, truth) -> float:
    """
    Adjusted Rand index: pair-counting agreement, corrected for chance.
    """

    pred, truth = _check_labels(pred, truth)
    if pred.size < 2:
        raise ValueError("The adjusted Rand index needs at least 2 samples")
    return float(adjusted_rand_score(truth, pred))


def completed_representation(model, ds: MultiViewDataset, mask: AvailabilityMask,
                             config: TrainConfig) -> Tuple[List[np.ndarray], np.ndarray]:
    """
    Encodes the available views, fills the missing latents by cross-view
    inference, and concatenates the V completed latent matrices (ascending
    view order) into the N x (V * D) representation that gets clustered.
    :param model: The trained model.
    :param ds: The dataset.
    :param mask: The availability mask.
    :param config: The config (for the normalization switch).
    :return: The completed per-view latents and their concatenation.
    """

    dtype = next(model.parameters()).dtype
    views = [torch.as_tensor(view, dtype=dtype) for view in masked_views(ds, mask, config.normalize)]
    with torch.no_grad():
        latents = model.encode(views)
        completed = complete_latents(latents, infer_all(model, latents), mask)
    completed = [latent.numpy().astype(np.float64) for latent in completed]
    return completed, np.concatenate(completed, axis=1)


def evaluate(model, ds: MultiViewDataset, mask: AvailabilityMask, config: TrainConfig) -> ClusteringReport:
    """
    Clusters the completed representation with k-means and, when the
    dataset has labels, scores the clustering against them.
    :param model: The trained model.
    :param ds: The dataset.
    :param mask: The availability mask.
    :param config: The config (k, restarts, iterations, tolerance, seed).
    :return: The report.
    """

    k = config.k or ds.k
    if k < 1:
        raise ValueError("The number of clusters must be configured when the dataset has no labels")
    _, embedding = completed_representation(model, ds, mask, config)
    fit = kmeans(embedding, k, config.restarts, derive_seed(config.seed, KMEANS), config.max_iter, config.tol)
    report = ClusteringReport(fit.labels, k, fit.inertia, config.seed)
    if ds.labels is not None:
        report = report._replace(acc=clustering_accuracy(fit.labels, ds.labels),
                                 nmi=nmi(fit.labels, ds.labels),
                                 ari=ari(fit.labels, ds.labels))
        _logger.info(f"Clustering: ACC={report.acc:.4f} NMI={report.nmi:.4f} ARI={report.ari:.4f}")
    return report


def scorer(ds: MultiViewDataset, mask: AvailabilityMask,
           config: TrainConfig) -> Optional[Callable[[object], Tuple[float, float, float]]]:
    """
    A callable scoring a model as (acc, nmi, ari), as the training loop
    expects it. None when the dataset has no labels.
    """

    if ds.labels is None:
        return None

    def score(model) -> Tuple[float, float, float]:
        report = evaluate(model, ds, mask, config)
        return report.acc, report.nmi, report.ari

    return score
