from typing import NamedTuple, Optional, List
import numpy as np


class MultiViewDataset(NamedTuple):
    """
    A multi-view dataset: V feature matrices describing the same N samples
    (one row per sample, in the same order in every view) and, perhaps, the
    ground-truth class of each sample. Instances are treated as immutable:
    operations over a dataset return a new one.
    """

    views: List[np.ndarray]
    labels: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.views[0].shape[0]

    @property
    def v(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> List[int]:
        return [view.shape[1] for view in self.views]

    @property
    def k(self) -> int:
        """
        The number of distinct classes in the labels, or 0 if there are
        no labels in this dataset.
        """

        if self.labels is None:
            return 0
        return int(np.unique(self.labels).size)

    def check(self):
        """
        Checks the dataset invariants: at least one view, every view is a 2D
        matrix with the same row count, no non-finite cells, and the labels
        (if any) are non-negative integers, one per sample.
        """

        if not self.views:
            raise ValueError("A dataset needs at least one view")
        n = self.views[0].shape[0]
        for index, view in enumerate(self.views):
            if view.ndim != 2:
                raise ValueError(f"View {index} is not a matrix")
            if view.shape[0] != n:
                raise ValueError(f"row-count mismatch: view {index} has {view.shape[0]} rows, "
                                 f"view 0 has {n}")
            if not np.all(np.isfinite(view)):
                raise ValueError(f"View {index} contains non-finite values")
        if self.labels is not None:
            if self.labels.shape != (n,):
                raise ValueError(f"Expected {n} labels, got {self.labels.shape[0]}")
            if np.any(self.labels < 0):
                raise ValueError("Labels must be non-negative")
        return self

    def select_views(self, indices: List[int]) -> "MultiViewDataset":
        """
        Keeps only the given views (in the given order).
        :param indices: The indices of the views to keep.
        :return: A new dataset.
        """

        return MultiViewDataset([self.views[index] for index in indices], self.labels)

    def select_rows(self, rows: np.ndarray) -> "MultiViewDataset":
        """
        Keeps only the given samples, in every view and in the labels.
        :param rows: A boolean selection or an index array.
        :return: A new dataset.
        """

        labels = None if self.labels is None else self.labels[rows]
        return MultiViewDataset([view[rows] for view in self.views], labels)


class AvailabilityMask(NamedTuple):
    """
    The N x V indicator matrix telling, per sample and view, whether the
    view is available (1) or missing (0) for that sample. Every sample has
    at least one available view.
    """

    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def v(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def full(cls, n: int, v: int) -> "AvailabilityMask":
        return cls(np.ones((n, v), dtype=np.int8))

    def check(self, n: Optional[int] = None, v: Optional[int] = None):
        """
        Checks the mask invariants, and optionally its shape against a
        dataset's shape.
        :param n: The expected sample count.
        :param v: The expected view count.
        """

        if self.entries.ndim != 2:
            raise ValueError("The availability mask must be a matrix")
        if (n is not None and self.n != n) or (v is not None and self.v != v):
            raise ValueError(f"Mask shape {self.entries.shape} does not match the dataset ({n}, {v})")
        if not np.isin(self.entries, (0, 1)).all():
            raise ValueError("Mask entries must be 0 or 1")
        empty = np.flatnonzero(self.entries.sum(axis=1) == 0)
        if empty.size:
            raise ValueError(f"Sample {empty[0]} has no available view")
        return self

    def available(self, view: int) -> np.ndarray:
        return self.entries[:, view] == 1

    def pair_rows(self, first: int, second: int) -> np.ndarray:
        """
        The samples where both views are available.
        """

        return self.available(first) & self.available(second)

    def complete_rows(self) -> np.ndarray:
        return self.entries.all(axis=1)

    def incomplete_count(self) -> int:
        return int((~self.complete_rows()).sum())

    def select_views(self, indices: List[int]) -> "AvailabilityMask":
        """
        Keeps only the given views. Samples may be left without any
        available view: drop them with `select_rows` before checking.
        """

        return AvailabilityMask(self.entries[:, indices].copy())

    def select_rows(self, rows: np.ndarray) -> "AvailabilityMask":
        return AvailabilityMask(self.entries[rows])
