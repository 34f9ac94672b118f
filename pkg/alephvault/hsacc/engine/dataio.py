import os
import hashlib
import logging
from typing import Optional, List, Iterable, Tuple
import numpy as np
import pandas as pd
from ..core.formats import VIEW_FILE, LABELS_FILE, MASK_FILE, FLOAT_FORMAT
from ..types.dataset import MultiViewDataset, AvailabilityMask


_logger = logging.getLogger(__name__ + ":logger")


class DatasetFormatError(Exception):
    """
    Raised when a dataset directory, or one of its files, does not follow
    the expected format.
    """


def _read_matrix(path: str, what: str) -> np.ndarray:
    """
    Reads a header-less, comma-separated matrix of numbers, telling the
    exact cell when something cannot be parsed.
    :param path: The file to read.
    :param what: How to name the file in the errors (e.g. "view 0").
    :return: The float64 matrix.
    """

    try:
        frame = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DatasetFormatError(f"{what} is empty: {path}")
    except pd.errors.ParserError as e:
        raise DatasetFormatError(f"{what} is malformed: {e}")

    frame = frame.apply(lambda column: column.str.strip())
    bad = frame.apply(lambda column: pd.to_numeric(column, errors="coerce")).isna().to_numpy()
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise DatasetFormatError(f"non-numeric cell at {what}, row {row}, col {col}: '{frame.iat[row, col]}'")
    # Python float parsing, so that 17 significant digits read back exactly.
    matrix = frame.to_numpy(dtype=object).astype(np.float64)
    if not np.isfinite(matrix).all():
        row, col = np.argwhere(~np.isfinite(matrix))[0]
        raise DatasetFormatError(f"non-finite cell at {what}, row {row}, col {col}")
    return matrix


def _view_files(dir_path: str) -> List[str]:
    paths = []
    while os.path.isfile(os.path.join(dir_path, VIEW_FILE.format(len(paths)))):
        paths.append(os.path.join(dir_path, VIEW_FILE.format(len(paths))))
    return paths


def load_dataset(dir_path: str) -> MultiViewDataset:
    """
    Loads a dataset directory: view_0.csv ... view_{V-1}.csv, and perhaps
    labels.csv (one non-negative integer per line).
    :param dir_path: The directory.
    :return: The dataset.
    """

    if not os.path.isdir(dir_path):
        raise DatasetFormatError(f"Dataset directory not found: {dir_path}")
    paths = _view_files(dir_path)
    if not paths:
        raise DatasetFormatError(f"Missing {VIEW_FILE.format(0)} in {dir_path}")

    views = [_read_matrix(path, f"view {index}") for index, path in enumerate(paths)]
    for index, view in enumerate(views):
        if view.shape[0] != views[0].shape[0]:
            raise DatasetFormatError(f"row-count mismatch: view {index} has {view.shape[0]} rows, "
                                     f"view 0 has {views[0].shape[0]}")

    labels = None
    labels_path = os.path.join(dir_path, LABELS_FILE)
    if os.path.isfile(labels_path):
        values = _read_matrix(labels_path, "labels")
        if values.shape[1] != 1:
            raise DatasetFormatError("labels.csv must have one integer per line")
        values = values[:, 0]
        if np.any(values < 0) or np.any(values != np.round(values)):
            raise DatasetFormatError("labels must be non-negative integers")
        if values.shape[0] != views[0].shape[0]:
            raise DatasetFormatError(f"row-count mismatch: labels have {values.shape[0]} rows, "
                                     f"view 0 has {views[0].shape[0]}")
        labels = values.astype(np.int64)

    dataset = MultiViewDataset(views, labels)
    _logger.info(f"Loaded dataset from {dir_path}: N={dataset.n}, V={dataset.v}, dims={dataset.dims}")
    return dataset


def _write_matrix(matrix: np.ndarray, path: str, fmt: str = FLOAT_FORMAT):
    np.savetxt(path, matrix, fmt=fmt, delimiter=",")


def save_dataset(ds: MultiViewDataset, dir_path: str, mask: Optional[AvailabilityMask] = None):
    """
    Writes a dataset in the format `load_dataset` reads. Floats are
    written with 17 significant digits, so reading them back gives the
    very same values.
    :param ds: The dataset.
    :param dir_path: The directory (created if absent).
    :param mask: An availability mask to write as well, if any.
    """

    os.makedirs(dir_path, exist_ok=True)
    for index, view in enumerate(ds.views):
        _write_matrix(view, os.path.join(dir_path, VIEW_FILE.format(index)))
    if ds.labels is not None:
        _write_matrix(ds.labels.reshape(-1, 1), os.path.join(dir_path, LABELS_FILE), fmt="%d")
    if mask is not None:
        save_mask(mask, os.path.join(dir_path, MASK_FILE))


def load_mask(path: str, n: Optional[int] = None, v: Optional[int] = None) -> AvailabilityMask:
    """
    Loads a mask.csv file (N rows of V comma-separated 0/1 values).
    :param path: The file.
    :param n: The expected sample count, if known.
    :param v: The expected view count, if known.
    :return: The mask.
    """

    if not os.path.isfile(path):
        raise DatasetFormatError(f"Mask file not found: {path}")
    entries = _read_matrix(path, "mask")
    if not np.isin(entries, (0, 1)).all():
        raise DatasetFormatError("mask cells must be 0 or 1")
    try:
        return AvailabilityMask(entries.astype(np.int8)).check(n, v)
    except ValueError as e:
        raise DatasetFormatError(str(e))


def save_mask(mask: AvailabilityMask, path: str):
    _write_matrix(mask.entries, path, fmt="%d")


def generate_mask(n: int, v: int, missing_rate: float, seed: int) -> AvailabilityMask:
    """
    Draws which samples miss which views. Exactly round(missing_rate * n)
    samples become incomplete; with two views, each of them loses one view
    chosen uniformly; with more views, each of them loses a uniformly
    chosen nonempty proper subset of its views.
    :param n: The sample count.
    :param v: The view count (at least 2).
    :param missing_rate: The fraction of incomplete samples, in [0, 1).
    :param seed: The seed of the draw.
    :return: The mask.
    """

    if v < 2:
        raise ValueError(f"Masking needs at least 2 views, got {v}")
    if not 0 <= missing_rate < 1:
        raise ValueError(f"The missing rate must be in [0, 1), got {missing_rate}")

    rng = np.random.default_rng(seed)
    entries = np.ones((n, v), dtype=np.int8)
    incomplete = int(np.floor(missing_rate * n + 0.5))
    rows = np.sort(rng.choice(n, size=incomplete, replace=False))
    for row in rows:
        # A nonempty proper subset, encoded as a bitmask in [1, 2^v - 2].
        removed = int(rng.integers(1, 2 ** v - 1))
        for view in range(v):
            if removed >> view & 1:
                entries[row, view] = 0
    return AvailabilityMask(entries)


def normalize_views(ds: MultiViewDataset, mask: Optional[AvailabilityMask] = None) -> MultiViewDataset:
    """
    Min-max scales every feature column to [0, 1]. With a mask, the range
    is computed over the available samples only (the missing ones are
    scaled with the same factors). Constant columns map to 0.
    :param ds: The dataset.
    :param mask: The availability mask, if any.
    :return: The normalized dataset.
    """

    views = []
    for index, view in enumerate(ds.views):
        rows = mask.available(index) if mask is not None else np.ones(view.shape[0], dtype=bool)
        reference = view[rows] if rows.any() else view
        low = reference.min(axis=0)
        span = reference.max(axis=0) - low
        scaled = np.zeros_like(view)
        varying = span > 0
        scaled[:, varying] = (view[:, varying] - low[varying]) / span[varying]
        views.append(scaled)
    return MultiViewDataset(views, ds.labels)


def synth_gaussian(n: int, k: int, dims: List[int], sep: float, noise: float, seed: int) -> MultiViewDataset:
    """
    Synthesizes a labelled multi-view dataset of Gaussian blobs. Labels
    are shared by all views and spread as evenly as possible over the k
    clusters. In each view, the cluster centers are pairwise at distance
    sep (at least sep when there are more clusters than dimensions).
    :param n: The sample count.
    :param k: The cluster count.
    :param dims: The dimension of each view.
    :param sep: The separation between cluster centers.
    :param noise: The standard deviation of the per-sample noise.
    :param seed: The seed.
    :return: The dataset.
    """

    if k < 2 or n < k:
        raise ValueError(f"Synthesis needs n >= k >= 2, got n={n}, k={k}")
    if not dims or any(dim < 1 for dim in dims):
        raise ValueError(f"Invalid view dimensions: {dims}")

    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % k)
    views = []
    for dim in dims:
        if k <= dim:
            # Orthonormal directions scaled by sep / sqrt(2) are pairwise
            # at distance sep exactly.
            basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
            centers = basis[:, :k].T * (sep / np.sqrt(2.0))
        else:
            centers = rng.standard_normal((k, dim))
            gaps = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
            closest = gaps[~np.eye(k, dtype=bool)].min()
            centers *= sep / max(closest, 1e-12)
        views.append(centers[labels] + noise * rng.standard_normal((n, dim)))
    return MultiViewDataset(views, labels.astype(np.int64))


def content_hash(paths: Iterable[str]) -> str:
    """
    A sha256 over the contents of the given files (absent files count as
    empty), in the given order.
    """

    digest = hashlib.sha256()
    for path in paths:
        digest.update(os.path.basename(path).encode("utf-8"))
        if path and os.path.isfile(path):
            with open(path, "rb") as f:
                digest.update(f.read())
    return digest.hexdigest()


def dataset_files(dir_path: str) -> List[str]:
    return _view_files(dir_path) + [os.path.join(dir_path, LABELS_FILE)]


def masked_views(ds: MultiViewDataset, mask: AvailabilityMask, normalize: bool = True) -> List[np.ndarray]:
    """
    The views as the networks consume them: optionally normalized (over the
    available samples) and with the cells of the missing (sample, view)
    entries zeroed, so no computation ever reads them.
    :param ds: The dataset.
    :param mask: The availability mask.
    :param normalize: Whether to min-max normalize first.
    :return: One matrix per view.
    """

    mask.check(ds.n, ds.v)
    if normalize:
        ds = normalize_views(ds, mask)
    return [np.where(mask.available(index)[:, None], view, 0.0) for index, view in enumerate(ds.views)]


def restrict_views(ds: MultiViewDataset, mask: AvailabilityMask,
                   indices: List[int]) -> Tuple[MultiViewDataset, AvailabilityMask]:
    """
    Keeps only the given views, in the dataset and in the mask, and drops
    the samples left without any available view among them.
    :param ds: The dataset.
    :param mask: The availability mask.
    :param indices: The views to keep.
    :return: The restricted dataset and mask.
    """

    mask.check(ds.n, ds.v)
    kept = mask.select_views(indices)
    rows = kept.entries.sum(axis=1) > 0
    dropped = int((~rows).sum())
    if dropped:
        _logger.info(f"Dropping {dropped} samples with none of the views {list(indices)}")
    return ds.select_views(indices).select_rows(rows), kept.select_rows(rows)
