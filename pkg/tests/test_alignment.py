import math
import numpy as np
import pytest
import torch
from numpy.testing import assert_allclose
from alephvault.hsacc.engine.alignment import (joint_distribution, mutual_information, mutual_information_loss,
                                               pairwise_mi_loss, view_discrepancy, view_weights, fuse,
                                               mmd_alignment_loss, mmd2, median_bandwidth)
from alephvault.hsacc.types.latent import ViewWeights


def _t(values):
    return torch.as_tensor(np.asarray(values, dtype=np.float64))


def _naive_mi_loss(z1: np.ndarray, z2: np.ndarray, eps: float = 1e-10) -> float:
    p1 = np.exp(z1 - z1.max(axis=1, keepdims=True))
    p1 /= p1.sum(axis=1, keepdims=True)
    p2 = np.exp(z2 - z2.max(axis=1, keepdims=True))
    p2 /= p2.sum(axis=1, keepdims=True)
    n, d = z1.shape
    p = np.zeros((d, d))
    for m in range(d):
        for k in range(d):
            p[m, k] = sum(p1[i, m] * p2[i, k] for i in range(n)) / n
    p = (p + p.T) / 2
    p = np.maximum(p, eps)
    p /= p.sum()
    rows, cols = p.sum(axis=1), p.sum(axis=0)
    total = 0.0
    for m in range(d):
        for k in range(d):
            total += p[m, k] * math.log(p[m, k] / (rows[m] * cols[k]))
    return -total


def _naive_rbf_mmd(x: np.ndarray, y: np.ndarray, bandwidth: float) -> float:
    def mean_kernel(a, b):
        return sum(math.exp(-sum((a[i, c] - b[j, c]) ** 2 for c in range(a.shape[1])) / bandwidth)
                   for i in range(a.shape[0]) for j in range(b.shape[0])) / (a.shape[0] * b.shape[0])
    return mean_kernel(x, x) + mean_kernel(y, y) - 2 * mean_kernel(x, y)


class TestMutualInformation:
    """The feature-level consistency loss."""

    def test_diagonal_joint(self):
        joint = joint_distribution(_t(np.eye(2)), _t(np.eye(2)))
        assert_allclose(joint.p.numpy(), [[0.5, 0], [0, 0.5]], atol=1e-9)
        assert -mutual_information(joint).item() == pytest.approx(-math.log(2), abs=1e-6)

    def test_near_one_hot_latents(self):
        z = _t(100 * np.eye(2))
        assert mutual_information_loss(z, z).item() == pytest.approx(-math.log(2), abs=1e-6)

    def test_constant_rows(self):
        z = _t(np.full((4, 2), 3.0))
        assert abs(mutual_information_loss(z, z).item()) < 1e-9

    def test_joint_invariants(self, rng):
        joint = joint_distribution(torch.softmax(_t(rng.standard_normal((6, 4))), 1),
                                   torch.softmax(_t(rng.standard_normal((6, 4))), 1))
        assert joint.p.sum().item() == pytest.approx(1.0, abs=1e-9)
        assert (joint.p >= 1e-10 - 1e-20).all()
        assert torch.allclose(joint.row_marginal, joint.p.sum(dim=1))
        assert torch.allclose(joint.p, joint.p.t())

    def test_matches_direct_evaluation(self, rng):
        z1, z2 = rng.standard_normal((6, 3)), rng.standard_normal((6, 3))
        assert mutual_information_loss(_t(z1), _t(z2)).item() == pytest.approx(_naive_mi_loss(z1, z2), abs=1e-12)

    def test_bounds(self, rng):
        for _ in range(1000):
            n, d = rng.integers(1, 8), rng.integers(2, 6)
            scale = rng.uniform(0.1, 20)
            loss = mutual_information_loss(_t(scale * rng.standard_normal((n, d))),
                                           _t(scale * rng.standard_normal((n, d)))).item()
            assert -math.log(d) - 1e-9 <= loss <= 1e-9

    def test_shape_checks(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            mutual_information_loss(torch.zeros(3, 2), torch.zeros(3, 3))
        with pytest.raises(ValueError):
            mutual_information_loss(torch.zeros(0, 2), torch.zeros(0, 2))


class TestPairwise:
    """Consistency over all the pairs of views."""

    def test_two_views(self, rng):
        z1, z2 = _t(rng.standard_normal((5, 3))), _t(rng.standard_normal((5, 3)))
        assert pairwise_mi_loss([z1, z2]).item() == pytest.approx(mutual_information_loss(z1, z2).item(), abs=1e-15)

    def test_identical_views(self, rng):
        z = _t(rng.standard_normal((5, 3)))
        assert pairwise_mi_loss([z, z, z]).item() == pytest.approx(mutual_information_loss(z, z).item(), abs=1e-12)

    def test_three_views(self, rng):
        z = [_t(rng.standard_normal((5, 3))) for _ in range(3)]
        expected = sum(mutual_information_loss(z[a], z[b]).item() for a, b in [(0, 1), (0, 2), (1, 2)]) / 3
        assert pairwise_mi_loss(z).item() == pytest.approx(expected, abs=1e-12)

    def test_available_rows_only(self, rng):
        z = [_t(rng.standard_normal((6, 3))) for _ in range(3)]
        available = [torch.tensor([True] * 6), torch.tensor([True] * 3 + [False] * 3),
                     torch.tensor([False] * 3 + [True] * 3)]
        expected = (mutual_information_loss(z[0][:3], z[1][:3]).item()
                    + mutual_information_loss(z[0][3:], z[2][3:]).item()) / 3
        assert pairwise_mi_loss(z, available).item() == pytest.approx(expected, abs=1e-12)

    def test_single_view(self):
        with pytest.raises(ValueError):
            pairwise_mi_loss([torch.zeros(3, 2)])


class TestDiscrepancy:
    """The linear-kernel discrepancy between a view and the initial fusion."""

    def test_same_set(self, rng):
        z = _t(rng.standard_normal((7, 4)))
        assert abs(view_discrepancy(z, z).item()) < 1e-10

    def test_single_sample(self):
        assert view_discrepancy(_t([[1, 0]]), _t([[0, 1]])).item() == pytest.approx(2.0)

    def test_two_samples(self):
        assert view_discrepancy(_t([[1, 0], [1, 0]]), _t([[0, 0], [0, 0]])).item() == pytest.approx(1.0)

    def test_kernel_sums_identity(self, rng):
        z, r = rng.standard_normal((6, 3)), rng.standard_normal((6, 3))
        n = z.shape[0]
        expected = ((z @ z.T).sum() + (r @ r.T).sum() - 2 * (z @ r.T).sum()) / n ** 2
        assert view_discrepancy(_t(z), _t(r)).item() == pytest.approx(expected, abs=1e-10)
        assert view_discrepancy(_t(z), _t(r)).item() >= 0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            view_discrepancy(torch.zeros(3, 2), torch.zeros(2, 2))


class TestWeights:
    """The view weights."""

    @pytest.mark.parametrize("discrepancies, expected", [
        ((0.0, 0.0), (0.5, 0.5)),
        ((1.0, 2.0), (0.7311, 0.2689)),
        ((0.0, math.log(3)), (0.75, 0.25)),
    ])
    def test_closed_forms(self, discrepancies, expected):
        weights = view_weights(discrepancies)
        assert_allclose(weights.w.numpy(), expected, atol=1e-4)
        assert weights.w.sum().item() == pytest.approx(1.0, abs=1e-9)

    def test_large_discrepancies(self):
        weights = view_weights([1000.0, 1001.0])
        assert torch.isfinite(weights.w).all()
        assert weights.w.sum().item() == pytest.approx(1.0, abs=1e-9)

    def test_permutation_equivariance_and_order(self, rng):
        values = rng.uniform(0, 3, size=5)
        order = rng.permutation(5)
        assert_allclose(view_weights(values[order]).w.numpy(), view_weights(values).w.numpy()[order])
        increasing = view_weights(np.sort(values)).w.numpy()
        assert (np.diff(increasing) < 0).all()

    def test_no_gradient(self):
        discrepancies = torch.tensor([0.5, 1.0], requires_grad=True)
        assert not view_weights(discrepancies).w.requires_grad

    def test_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            view_weights([0.0, float("inf")])


class TestFuse:
    """Initial and weighted fusion."""

    def test_equal_weights(self):
        bundle = fuse([_t([[2, 0]]), _t([[0, 2]])], view_weights([0.0, 0.0]))
        assert_allclose(bundle.h.numpy(), [[1, 1]])
        assert_allclose(bundle.r.numpy(), [[1, 1]])

    def test_degenerate_weight(self, rng):
        z1, z2 = _t(rng.standard_normal((3, 2))), _t(rng.standard_normal((3, 2)))
        weights = ViewWeights(torch.tensor([1.0, 0.0], dtype=torch.float64), torch.zeros(2))
        assert torch.equal(fuse([z1, z2], weights).h, z1)

    def test_weighted_sum(self, rng):
        z = [rng.standard_normal((4, 3)) for _ in range(3)]
        weights = view_weights(rng.uniform(0, 2, size=3))
        w = weights.w.numpy()
        bundle = fuse([_t(latent) for latent in z], weights)
        assert_allclose(bundle.h.numpy(), w[0] * z[0] + w[1] * z[1] + w[2] * z[2], atol=1e-12)
        assert_allclose(bundle.r.numpy(), (z[0] + z[1] + z[2]) / 3, atol=1e-12)

    def test_mismatches(self):
        with pytest.raises(ValueError):
            fuse([torch.zeros(2, 2), torch.zeros(3, 2)], view_weights([0.0, 0.0]))
        with pytest.raises(ValueError):
            fuse([torch.zeros(2, 2)], view_weights([0.0, 0.0]))


class TestMmd:
    """Distribution alignment."""

    def test_identical(self, rng):
        h = _t(rng.standard_normal((5, 3)))
        assert abs(mmd_alignment_loss([h, h], h).item()) < 1e-12
        assert abs(mmd_alignment_loss([h, h], h, "rbf").item()) < 1e-12

    def test_mean_shift(self):
        z = _t([[1.0, 0.0], [3.0, 2.0]])
        h = _t([[0.0, 0.0], [2.0, 2.0]])
        assert mmd_alignment_loss([z], h).item() == pytest.approx(1.0)

    def test_linear_identity(self, rng):
        for _ in range(100):
            n, d, v = rng.integers(1, 8), rng.integers(1, 6), rng.integers(2, 4)
            z = [rng.standard_normal((n, d)) for _ in range(v)]
            h = rng.standard_normal((n, d))
            expected = sum(((latent.mean(axis=0) - h.mean(axis=0)) ** 2).sum() for latent in z)
            assert mmd_alignment_loss([_t(latent) for latent in z], _t(h)).item() == pytest.approx(expected, abs=1e-9)

    def test_rbf_matches_dense_loops(self, rng):
        x, y = rng.standard_normal((5, 3)), rng.standard_normal((5, 3))
        assert mmd2(_t(x), _t(y), "rbf", 1.5).item() == pytest.approx(_naive_rbf_mmd(x, y, 1.5), abs=1e-12)
        bandwidth = median_bandwidth(_t(x), _t(y))
        assert mmd_alignment_loss([_t(x)], _t(y), "rbf").item() == pytest.approx(
            _naive_rbf_mmd(x, y, bandwidth), abs=1e-12)

    def test_median_bandwidth_fallback(self):
        assert median_bandwidth(torch.ones(3, 2)) == 1.0

    def test_non_negative(self, rng):
        for kernel in ("linear", "rbf"):
            z = [_t(rng.standard_normal((6, 3))) for _ in range(2)]
            assert mmd_alignment_loss(z, _t(rng.standard_normal((6, 3))), kernel).item() >= -1e-12

    def test_errors(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            mmd_alignment_loss([torch.zeros(3, 2)], torch.zeros(3, 3))
        with pytest.raises(ValueError):
            mmd2(torch.zeros(3, 2), torch.zeros(3, 2), "cosine")
