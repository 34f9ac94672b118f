import numpy as np
import pytest
from numpy.testing import assert_array_equal, assert_allclose
from alephvault.hsacc.engine.dataio import (DatasetFormatError, load_dataset, save_dataset, load_mask, save_mask,
                                            generate_mask, normalize_views, synth_gaussian, masked_views,
                                            content_hash, dataset_files, restrict_views)
from alephvault.hsacc.types.dataset import MultiViewDataset, AvailabilityMask


def _write(path, text):
    path.write_text(text)


class TestLoadDataset:
    """Reading dataset directories."""

    def test_two_views(self, tmp_path):
        _write(tmp_path / "view_0.csv", "1,2\n3,4\n5,6\n7,8\n")
        _write(tmp_path / "view_1.csv", "0,1\n1,0\n0.5,0.5\n2,2\n")
        ds = load_dataset(str(tmp_path))
        assert (ds.v, ds.n, ds.dims) == (2, 4, [2, 2])
        assert ds.labels is None

    def test_labels(self, tmp_path):
        _write(tmp_path / "view_0.csv", "1\n2\n3\n")
        _write(tmp_path / "labels.csv", "0\n2\n1\n")
        ds = load_dataset(str(tmp_path))
        assert_array_equal(ds.labels, [0, 2, 1])
        assert ds.k == 3

    def test_row_count_mismatch(self, tmp_path):
        _write(tmp_path / "view_0.csv", "1,2\n3,4\n5,6\n7,8\n")
        _write(tmp_path / "view_1.csv", "1,2\n3,4\n5,6\n7,8\n9,10\n")
        with pytest.raises(DatasetFormatError, match="row-count mismatch"):
            load_dataset(str(tmp_path))

    def test_non_numeric_cell(self, tmp_path):
        _write(tmp_path / "view_0.csv", "1,2\n3,4\n5,abc\n7,8\n")
        with pytest.raises(DatasetFormatError, match="non-numeric cell at view 0, row 2, col 1"):
            load_dataset(str(tmp_path))

    def test_non_finite_cell(self, tmp_path):
        _write(tmp_path / "view_0.csv", "1,2\ninf,4\n")
        with pytest.raises(DatasetFormatError, match="non-finite"):
            load_dataset(str(tmp_path))

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DatasetFormatError):
            load_dataset(str(tmp_path / "nowhere"))

    def test_missing_views(self, tmp_path):
        with pytest.raises(DatasetFormatError, match="view_0.csv"):
            load_dataset(str(tmp_path))

    def test_save_then_load_is_exact(self, tmp_path, dataset):
        save_dataset(dataset, str(tmp_path))
        loaded = load_dataset(str(tmp_path))
        for original, read in zip(dataset.views, loaded.views):
            assert_array_equal(original, read)
        assert_array_equal(dataset.labels, loaded.labels)


class TestMasks:
    """Drawing, reading and writing availability masks."""

    def test_half_rate_two_views(self):
        entries = generate_mask(10, 2, 0.5, 7).entries
        assert (entries.sum(axis=1) == 1).sum() == 5
        assert (entries.sum(axis=1) == 2).sum() == 5

    def test_zero_rate(self):
        assert_array_equal(generate_mask(10, 2, 0.0, 3).entries, np.ones((10, 2)))

    def test_deterministic(self):
        assert_array_equal(generate_mask(50, 3, 0.4, 9).entries, generate_mask(50, 3, 0.4, 9).entries)

    def test_many_views_keep_one(self):
        mask = generate_mask(200, 4, 0.9, 1)
        assert mask.incomplete_count() == 180
        assert (mask.entries.sum(axis=1) >= 1).all()
        mask.check(200, 4)

    @pytest.mark.parametrize("v, rate", [(1, 0.5), (2, 1.0), (2, -0.1)])
    def test_invalid_arguments(self, v, rate):
        with pytest.raises(ValueError):
            generate_mask(10, v, rate, 0)

    def test_write_then_read(self, tmp_path):
        mask = generate_mask(12, 3, 0.5, 2)
        save_mask(mask, str(tmp_path / "mask.csv"))
        assert_array_equal(load_mask(str(tmp_path / "mask.csv"), 12, 3).entries, mask.entries)

    def test_rejects_empty_rows(self, tmp_path):
        _write(tmp_path / "mask.csv", "1,0\n0,0\n")
        with pytest.raises(DatasetFormatError, match="no available view"):
            load_mask(str(tmp_path / "mask.csv"))

    def test_rejects_other_values(self, tmp_path):
        _write(tmp_path / "mask.csv", "1,2\n")
        with pytest.raises(DatasetFormatError):
            load_mask(str(tmp_path / "mask.csv"))

    def test_rejects_wrong_shape(self, tmp_path):
        _write(tmp_path / "mask.csv", "1,1\n1,0\n")
        with pytest.raises(DatasetFormatError):
            load_mask(str(tmp_path / "mask.csv"), 3, 2)

    def test_row_selections(self):
        mask = AvailabilityMask(np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=np.int8))
        assert_array_equal(mask.pair_rows(0, 1), [True, True, False])
        assert_array_equal(mask.pair_rows(0, 2), [False, True, False])
        assert_array_equal(mask.complete_rows(), [False, True, False])
        assert mask.incomplete_count() == 2

    def test_view_restriction_drops_uncovered_samples(self):
        ds = MultiViewDataset([np.array([[1.0], [2.0], [3.0]]), np.array([[4.0], [5.0], [6.0]]),
                               np.array([[7.0], [8.0], [9.0]])], np.array([0, 1, 2]))
        mask = AvailabilityMask(np.array([[1, 1, 0], [0, 0, 1], [0, 1, 1]], dtype=np.int8))
        kept_ds, kept_mask = restrict_views(ds, mask, [0, 1])
        assert_array_equal(kept_mask.entries, [[1, 1], [0, 1]])
        assert_array_equal(kept_ds.labels, [0, 2])
        assert_array_equal(kept_ds.views[0], [[1.0], [3.0]])
        views = masked_views(kept_ds, kept_mask, normalize=False)
        assert_array_equal(views[0], [[1.0], [0.0]])
        assert_array_equal(views[1], [[4.0], [6.0]])


class TestNormalize:
    """Min-max normalization."""

    def test_columns(self):
        ds = MultiViewDataset([np.array([[0.0, 3.0, 0.0], [5.0, 3.0, 0.5], [10.0, 3.0, 1.0]])])
        assert_allclose(normalize_views(ds).views[0], [[0, 0, 0], [0.5, 0, 0.5], [1, 0, 1]])

    def test_range_over_available_samples(self):
        ds = MultiViewDataset([np.array([[0.0], [10.0], [100.0]]), np.zeros((3, 1))])
        mask = AvailabilityMask(np.array([[1, 1], [1, 1], [0, 1]], dtype=np.int8))
        assert_allclose(normalize_views(ds, mask).views[0][:2], [[0.0], [1.0]])

    def test_masked_views_zero_the_missing_entries(self, dataset, half_mask):
        views = masked_views(dataset, half_mask)
        for index, view in enumerate(views):
            missing = ~half_mask.available(index)
            assert (view[missing] == 0).all()
            assert view.min() >= 0 and view.max() <= 1


class TestSynth:
    """Synthetic Gaussian clusters."""

    def test_zero_noise_gives_centers(self):
        ds = synth_gaussian(40, 4, [6, 3], 5.0, 0.0, 8)
        for view in ds.views:
            for label in range(4):
                members = view[ds.labels == label]
                assert_allclose(members, np.broadcast_to(members[0], members.shape))

    def test_center_separation(self):
        ds = synth_gaussian(40, 4, [6, 3], 5.0, 0.0, 8)
        for view in ds.views:
            centers = np.stack([view[ds.labels == label][0] for label in range(4)])
            gaps = np.linalg.norm(centers[:, None] - centers[None, :], axis=-1)[~np.eye(4, dtype=bool)]
            assert gaps.min() >= 5.0 - 1e-9

    def test_balanced_labels(self):
        ds = synth_gaussian(10, 3, [2, 2], 1.0, 0.1, 0)
        assert sorted(np.bincount(ds.labels)) == [3, 3, 4]

    def test_deterministic(self):
        first, second = synth_gaussian(30, 3, [4, 4], 3.0, 0.2, 5), synth_gaussian(30, 3, [4, 4], 3.0, 0.2, 5)
        for a, b in zip(first.views, second.views):
            assert_array_equal(a, b)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            synth_gaussian(3, 4, [2, 2], 1.0, 0.1, 0)


class TestContentHash:
    """Hashing input files."""

    def test_changes_with_content(self, tmp_path, dataset):
        save_dataset(dataset, str(tmp_path))
        before = content_hash(dataset_files(str(tmp_path)))
        assert before == content_hash(dataset_files(str(tmp_path)))
        _write(tmp_path / "labels.csv", "0\n" * dataset.n)
        assert before != content_hash(dataset_files(str(tmp_path)))
