from typing import Optional, Sequence
import torch
from ..types.latent import JointDistribution, ViewWeights, LatentBundle


EPS = 1e-10


def _check_pair(first: torch.Tensor, second: torch.Tensor):
    if first.shape != second.shape:
        raise ValueError(f"shape mismatch: {tuple(first.shape)} vs {tuple(second.shape)}")
    if first.dim() != 2 or first.shape[0] == 0:
        raise ValueError(f"Expected a non-empty N x D matrix, got shape {tuple(first.shape)}")


def joint_distribution(p1: torch.Tensor, p2: torch.Tensor, eps: float = EPS) -> JointDistribution:
    """
    Builds the joint distribution between the features of two views, out of
    row-stochastic representations (each row a distribution over the D
    features): P[m, n] is the mean, over samples, of p1[i, m] * p2[i, n].
    P is then symmetrized, clamped at eps and renormalized.
    :param p1: The first view's N x D row-stochastic matrix.
    :param p2: The second view's N x D row-stochastic matrix.
    :param eps: The clamping floor.
    :return: The joint distribution and its marginals.
    """

    _check_pair(p1, p2)
    p = p1.t() @ p2 / p1.shape[0]
    p = (p + p.t()) / 2
    p = p.clamp(min=eps)
    p = p / p.sum()
    return JointDistribution(p, p.sum(dim=1), p.sum(dim=0))


def mutual_information(joint: JointDistribution) -> torch.Tensor:
    """
    The mutual information of a joint distribution: sum of P ln(P / (P_m P_n)).
    """

    marginals = joint.row_marginal.unsqueeze(1) * joint.col_marginal.unsqueeze(0)
    return (joint.p * (torch.log(joint.p) - torch.log(marginals))).sum()


def mutual_information_loss(z1: torch.Tensor, z2: torch.Tensor) -> torch.Tensor:
    """
    The cross-view consistency loss: the negated mutual information between
    the features of two views. The latents are turned into distributions
    over features by a row-wise softmax first. The value lies in
    [-ln D, 0].
    :param z1: The first view's N x D latents.
    :param z2: The second view's N x D latents (same samples, same order).
    :return: The scalar loss.
    """

    _check_pair(z1, z2)
    joint = joint_distribution(torch.softmax(z1, dim=1), torch.softmax(z2, dim=1))
    return -mutual_information(joint)


def pairwise_mi_loss(latents: Sequence[torch.Tensor], available: Optional[Sequence[torch.Tensor]] = None
                     ) -> torch.Tensor:
    """
    The consistency loss over all the pairs of views: the mean, over the
    V(V-1)/2 unordered pairs, of the pair's mutual information loss.
    :param latents: The V latent matrices (same samples, same order).
    :param available: Optionally, one boolean row mask per view. Then each
      pair only considers the rows where both views are available, and a
      pair without such rows contributes 0.
    :return: The scalar loss.
    """

    v = len(latents)
    if v < 2:
        raise ValueError(f"At least 2 views are needed, got {v}")
    total = latents[0].new_zeros(())
    for first in range(v):
        for second in range(first + 1, v):
            z1, z2 = latents[first], latents[second]
            if available is not None:
                rows = available[first] & available[second]
                if not bool(rows.any()):
                    continue
                z1, z2 = z1[rows], z2[rows]
            total = total + mutual_information_loss(z1, z2)
    return total * (2.0 / (v * (v - 1)))


def median_bandwidth(x: torch.Tensor, y: Optional[torch.Tensor] = None) -> float:
    """
    The median heuristic: the median of the pairwise squared distances
    among the pooled samples (not differentiated), used as 2 sigma^2 of the
    Gaussian kernel. Falls back to 1 when every sample is the same.
    """

    with torch.no_grad():
        pooled = x if y is None else torch.cat([x, y])
        distances = torch.cdist(pooled, pooled).pow(2)
        off_diagonal = distances[~torch.eye(pooled.shape[0], dtype=torch.bool, device=pooled.device)]
        positive = off_diagonal[off_diagonal > 0]
        if positive.numel() == 0:
            return 1.0
        return float(positive.median())


def rbf_kernel(x: torch.Tensor, y: torch.Tensor, bandwidth: float) -> torch.Tensor:
    """
    The Gaussian kernel matrix exp(-|x_i - y_j|^2 / bandwidth).
    """

    squared = (x.pow(2).sum(dim=1, keepdim=True) + y.pow(2).sum(dim=1).unsqueeze(0) - 2 * x @ y.t()).clamp(min=0)
    return torch.exp(-squared / bandwidth)


def mmd2(x: torch.Tensor, y: torch.Tensor, kernel: str = "linear", bandwidth: float = 0.0) -> torch.Tensor:
    """
    The (biased) squared maximum mean discrepancy between two samples:
    mean(K_xx) + mean(K_yy) - 2 mean(K_xy). With the linear kernel this is
    exactly the squared distance between the sample means, which is how it
    gets computed.
    :param x: The first N x D sample.
    :param y: The second M x D sample.
    :param kernel: Either "linear" or "rbf".
    :param bandwidth: The rbf bandwidth; 0 means the median heuristic.
    :return: The scalar discrepancy.
    """

    if x.dim() != 2 or y.dim() != 2 or x.shape[1] != y.shape[1]:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("The discrepancy needs non-empty samples")
    if kernel == "linear":
        return (x.mean(dim=0) - y.mean(dim=0)).pow(2).sum()
    elif kernel == "rbf":
        bandwidth = bandwidth or median_bandwidth(x, y)
        return (rbf_kernel(x, x, bandwidth).mean() + rbf_kernel(y, y, bandwidth).mean()
                - 2 * rbf_kernel(x, y, bandwidth).mean())
    raise ValueError(f"Unknown kernel: {kernel}")


def view_discrepancy(z: torch.Tensor, r: torch.Tensor) -> torch.Tensor:
    """
    The linear-kernel discrepancy between a view's latents and the initial
    fusion: (1/N^2) (sum z_i.z_j + sum r_i.r_j - 2 sum z_i.r_j), which is
    |mean(z) - mean(r)|^2.
    """

    _check_pair(z, r)
    return mmd2(z, r, "linear")


def view_weights(discrepancies: Sequence[float]) -> ViewWeights:
    """
    The fusion weights: the softmax of the negated discrepancies (so the
    closer a view to the initial fusion, the heavier). Weights are
    constants: no gradient flows through them.
    :param discrepancies: One discrepancy per view.
    :return: The weights.
    """

    with torch.no_grad():
        if isinstance(discrepancies, torch.Tensor):
            values = discrepancies.detach().to(torch.float64).reshape(-1)
        else:
            values = torch.tensor([float(value) for value in discrepancies], dtype=torch.float64)
        if not bool(torch.isfinite(values).all()):
            raise ValueError(f"non-finite discrepancies: {values.tolist()}")
        # torch.softmax subtracts the maximum before exponentiating.
        weights = torch.softmax(-values, dim=0)
    return ViewWeights(weights, values)


def fuse(latents: Sequence[torch.Tensor], weights: ViewWeights) -> LatentBundle:
    """
    Fuses the views' latents: their elementwise mean (the initial fusion
    R) and their weighted sum (the common representation H).
    :param latents: The V latent matrices (same samples, same order).
    :param weights: The fusion weights.
    :return: The bundle.
    """

    latents = list(latents)
    if len(latents) != weights.w.shape[0]:
        raise ValueError(f"{len(latents)} views but {weights.w.shape[0]} weights")
    for latent in latents[1:]:
        _check_pair(latents[0], latent)
    stacked = torch.stack(latents)
    w = weights.w.to(stacked.dtype).reshape(-1, 1, 1)
    return LatentBundle(latents, stacked.mean(dim=0), (w * stacked).sum(dim=0), weights)


def estimate_weights(latents: Sequence[torch.Tensor]) -> ViewWeights:
    """
    Weights the views by how close each is to their initial fusion.
    """

    with torch.no_grad():
        r = torch.stack(list(latents)).mean(dim=0)
        return view_weights([float(view_discrepancy(latent, r)) for latent in latents])


def mmd_alignment_loss(latents: Sequence[torch.Tensor], h: torch.Tensor, kernel: str = "linear",
                       bandwidth: float = 0.0) -> torch.Tensor:
    """
    The distribution alignment loss: the sum, over views, of the squared
    maximum mean discrepancy between the view's latents and the common
    representation H.
    :param latents: The V latent matrices.
    :param h: The common representation.
    :param kernel: Either "linear" or "rbf" (median-heuristic bandwidth
      when the bandwidth is 0).
    :param bandwidth: The rbf bandwidth.
    :return: The scalar loss.
    """

    total = h.new_zeros(())
    for latent in latents:
        _check_pair(latent, h)
        total = total + mmd2(latent, h, kernel, bandwidth)
    return total
