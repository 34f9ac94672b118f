import hashlib
import json
from typing import NamedTuple, Optional
import numpy as np


class ClusteringReport(NamedTuple):
    """
    The outcome of clustering the completed representations: the predicted
    cluster of each sample, the k-means inertia and, when ground-truth
    labels exist, the ACC / NMI / ARI metrics (None otherwise).
    """

    predicted: np.ndarray
    k: int
    inertia: float
    seed: int
    acc: Optional[float] = None
    nmi: Optional[float] = None
    ari: Optional[float] = None

    def as_dict(self) -> dict:
        """
        The JSON-friendly summary (the predicted labels are omitted, since
        they are exported separately).
        """

        result = {"k": self.k, "inertia": self.inertia, "seed": self.seed}
        if self.acc is not None:
            result.update(acc=self.acc, nmi=self.nmi, ari=self.ari)
        return result


class RunManifest(NamedTuple):
    """
    Everything needed to tell whether two runs had identical inputs.
    """

    command: str
    config: dict
    dataset_path: str
    dataset_hash: str
    mask_hash: str
    version: str
    seed: int
    duration: float = 0.0

    def digest(self) -> str:
        """
        A hash over the inputs only (duration excluded): it changes if, and
        only if, an input file or a setting changes.
        """

        payload = json.dumps({
            "command": self.command, "config": self.config, "dataset_hash": self.dataset_hash,
            "mask_hash": self.mask_hash, "version": self.version, "seed": self.seed
        }, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class KMeansFit(NamedTuple):
    """
    The best k-means solution among the restarts: labels in [0, k), the
    centers (the means of their clusters), the inertia (within-cluster sum
    of squared distances) and which restart produced it.
    """

    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    restart: int
