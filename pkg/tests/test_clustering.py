import itertools
import math
import numpy as np
import pytest
import torch
from numpy.testing import assert_array_equal
from alephvault.hsacc.engine.clustering import (kmeans, clustering_accuracy, nmi, ari, evaluate, scorer,
                                                completed_representation)
from alephvault.hsacc.engine.dataio import synth_gaussian, masked_views
from alephvault.hsacc.engine.trainer import train
from alephvault.hsacc.types.dataset import MultiViewDataset, AvailabilityMask


def _brute_force_accuracy(pred, truth):
    clusters, classes = np.unique(pred), np.unique(truth)
    slots = max(clusters.size, classes.size)
    best = 0
    for permutation in itertools.permutations(range(slots), clusters.size):
        assigned = dict(zip(clusters, permutation))
        matched = sum(1 for p, t in zip(pred, truth)
                      if assigned[p] < classes.size and classes[assigned[p]] == t)
        best = max(best, matched)
    return best / len(pred)


def _entropy(labels):
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    return -sum(value * math.log(value) for value in p)


def _direct_nmi(pred, truth):
    n = len(pred)
    mi = 0.0
    for a in np.unique(pred):
        for b in np.unique(truth):
            joint = sum(1 for p, t in zip(pred, truth) if p == a and t == b) / n
            if joint > 0:
                mi += joint * math.log(joint / ((np.sum(pred == a) / n) * (np.sum(truth == b) / n)))
    entropies = _entropy(pred) + _entropy(truth)
    return 0.0 if entropies == 0 else mi / (entropies / 2)


def _pair_counting_ari(pred, truth):
    n = len(pred)
    both = same_pred = same_truth = 0
    for i, j in itertools.combinations(range(n), 2):
        sp, st = pred[i] == pred[j], truth[i] == truth[j]
        both += sp and st
        same_pred += sp
        same_truth += st
    pairs = n * (n - 1) / 2
    expected = same_pred * same_truth / pairs
    maximum = (same_pred + same_truth) / 2
    if maximum == expected:
        return 1.0
    return (both - expected) / (maximum - expected)


class TestKMeans:
    """k-means with restarts."""

    def test_two_groups(self):
        fit = kmeans(np.array([[0.0], [0.1], [10.0], [10.1]]), 2, restarts=5, seed=0)
        assert fit.labels[0] == fit.labels[1] != fit.labels[2] == fit.labels[3]
        assert fit.inertia == pytest.approx(0.01, abs=1e-9)

    def test_single_cluster(self, rng):
        x = rng.standard_normal((20, 3))
        fit = kmeans(x, 1, restarts=2)
        assert (fit.labels == 0).all()
        assert fit.inertia == pytest.approx(((x - x.mean(axis=0)) ** 2).sum(), abs=1e-9)

    def test_one_cluster_per_point(self):
        x = np.array([[0.0], [0.1], [10.0], [10.1]])
        fit = kmeans(x, 4, restarts=3)
        assert sorted(fit.labels) == [0, 1, 2, 3]
        assert fit.inertia == pytest.approx(0.0, abs=1e-12)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((2, 3)), 3)

    def test_deterministic(self, rng):
        x = rng.standard_normal((60, 4))
        first, second = kmeans(x, 5, restarts=4, seed=8), kmeans(x, 5, restarts=4, seed=8)
        assert_array_equal(first.labels, second.labels)
        assert first.inertia == second.inertia
        assert first.restart == second.restart

    def test_inertia_matches_labels(self, rng):
        x = rng.standard_normal((50, 3))
        fit = kmeans(x, 4, restarts=6, seed=1)
        recomputed = sum(((x[fit.labels == cluster] - x[fit.labels == cluster].mean(axis=0)) ** 2).sum()
                         for cluster in range(4))
        assert fit.inertia == pytest.approx(recomputed, abs=1e-9)
        assert set(fit.labels) == {0, 1, 2, 3}

    def test_separated_blobs(self):
        ds = synth_gaussian(200, 4, [8, 8], 10.0, 0.5, 21)
        for view in ds.views:
            assert clustering_accuracy(kmeans(view, 4, restarts=10, seed=2).labels, ds.labels) >= 0.99


class TestMetrics:
    """ACC, NMI and ARI."""

    @pytest.mark.parametrize("pred, truth, expected", [
        ([1, 1, 0, 0], [0, 0, 1, 1], 1.0),
        ([0, 1, 0, 1], [0, 0, 1, 1], 0.5),
        ([0, 0, 0, 0], [0, 1, 2, 3], 0.25),
    ])
    def test_accuracy_examples(self, pred, truth, expected):
        assert clustering_accuracy(pred, truth) == pytest.approx(expected)

    def test_nmi_examples(self):
        assert nmi([0, 0, 1, 1, 2, 2], [0, 0, 1, 1, 2, 2]) == pytest.approx(1.0)
        assert nmi([0, 0, 0, 0], [0, 0, 1, 1]) == pytest.approx(0.0, abs=1e-12)
        pred, truth = np.array([0, 0, 1, 1, 2, 2]), np.array([0, 0, 0, 1, 1, 1])
        assert nmi(pred, truth) == pytest.approx(_direct_nmi(pred, truth), abs=1e-9)
        assert nmi([0, 0, 0], [1, 1, 1]) == 0.0

    def test_ari_examples(self):
        assert ari([2, 2, 0, 1], [2, 2, 0, 1]) == pytest.approx(1.0)
        pred, truth = np.array([0, 1, 0, 1]), np.array([0, 0, 1, 1])
        assert ari(pred, truth) == pytest.approx(_pair_counting_ari(pred, truth), abs=1e-9)
        assert ari([0, 0, 0, 0], [0, 0, 1, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_oracles(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 11))
            k = int(rng.integers(1, 6))
            pred, truth = rng.integers(0, k, size=n), rng.integers(0, k, size=n)
            assert clustering_accuracy(pred, truth) == pytest.approx(_brute_force_accuracy(pred, truth), abs=1e-12)
            assert nmi(pred, truth) == pytest.approx(_direct_nmi(pred, truth), abs=1e-9)
            assert ari(pred, truth) == pytest.approx(_pair_counting_ari(pred, truth), abs=1e-9)

    def test_ranges_and_relabeling(self, rng):
        for _ in range(50):
            pred, truth = rng.integers(0, 4, size=12), rng.integers(0, 3, size=12)
            relabeled_pred = rng.permutation(4)[pred]
            relabeled_truth = rng.permutation(3)[truth]
            acc, score, adjusted = clustering_accuracy(pred, truth), nmi(pred, truth), ari(pred, truth)
            assert 0 <= acc <= 1 and 0 <= score <= 1 + 1e-12 and adjusted <= 1 + 1e-12
            assert clustering_accuracy(relabeled_pred, relabeled_truth) == pytest.approx(acc)
            assert nmi(relabeled_pred, relabeled_truth) == pytest.approx(score, abs=1e-12)
            assert ari(relabeled_pred, relabeled_truth) == pytest.approx(adjusted, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError, match="length mismatch"):
            clustering_accuracy([0, 1], [0, 1, 1])
        with pytest.raises(ValueError, match="length mismatch"):
            nmi([0], [0, 1])
        with pytest.raises(ValueError):
            ari([0], [0])


class TestEvaluate:
    """Clustering the completed representation."""

    @pytest.fixture
    def trained(self, tiny_config, dataset, half_mask):
        return train(tiny_config._replace(epochs=2), dataset, half_mask).model

    def test_zero_noise(self, tiny_config):
        ds = synth_gaussian(60, 3, [5, 4], 10.0, 0.0, 4)
        mask = AvailabilityMask.full(ds.n, ds.v)
        config = tiny_config._replace(epochs=2)
        report = evaluate(train(config, ds, mask).model, ds, mask, config)
        assert report.acc == 1.0
        assert report.nmi == pytest.approx(1.0)
        assert report.ari == pytest.approx(1.0)

    def test_full_mask_keeps_the_encodings(self, trained, tiny_config, dataset):
        mask = AvailabilityMask.full(dataset.n, dataset.v)
        completed, embedding = completed_representation(trained, dataset, mask, tiny_config)
        with torch.no_grad():
            views = [torch.as_tensor(view, dtype=torch.float32) for view in masked_views(dataset, mask)]
            latents = trained.encode(views)
        for latent, filled in zip(latents, completed):
            assert_array_equal(latent.numpy().astype(np.float64), filled)
        assert embedding.shape == (dataset.n, dataset.v * tiny_config.latent_dim)

    def test_deterministic(self, trained, tiny_config, dataset, half_mask):
        first = evaluate(trained, dataset, half_mask, tiny_config)
        second = evaluate(trained, dataset, half_mask, tiny_config)
        assert_array_equal(first.predicted, second.predicted)
        assert first.as_dict() == second.as_dict()
        assert first.k == 3

    def test_no_labels(self, trained, tiny_config, dataset, half_mask):
        unlabelled = MultiViewDataset(dataset.views)
        report = evaluate(trained, unlabelled, half_mask, tiny_config._replace(k=3))
        assert report.acc is None and report.nmi is None and report.ari is None
        assert set(report.as_dict()) == {"k", "inertia", "seed"}
        assert scorer(unlabelled, half_mask, tiny_config) is None

    def test_unknown_cluster_count(self, trained, tiny_config, dataset, half_mask):
        with pytest.raises(ValueError):
            evaluate(trained, MultiViewDataset(dataset.views), half_mask, tiny_config)

    def test_scorer(self, trained, tiny_config, dataset, half_mask):
        acc, score, adjusted = scorer(dataset, half_mask, tiny_config)(trained)
        assert acc == evaluate(trained, dataset, half_mask, tiny_config).acc
        assert 0 <= score <= 1 and adjusted <= 1
