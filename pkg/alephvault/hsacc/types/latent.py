from typing import NamedTuple, List, Dict, Tuple
import torch


class JointDistribution(NamedTuple):
    """
    The D x D joint distribution between the features of two views, and
    its row / column marginals.
    """

    p: torch.Tensor
    row_marginal: torch.Tensor
    col_marginal: torch.Tensor


class ViewWeights(NamedTuple):
    """
    The per-view fusion weights: the softmax of the negated discrepancies
    between each view and the initial fused representation. Weights never
    carry gradient.
    """

    w: torch.Tensor
    discrepancies: torch.Tensor


class LatentBundle(NamedTuple):
    """
    The latent representations of a batch: one matrix per view, their
    elementwise mean (the initial fusion) and their weighted fusion.
    """

    z: List[torch.Tensor]
    r: torch.Tensor
    h: torch.Tensor
    weights: ViewWeights


class CompletionOutputs(NamedTuple):
    """
    The cross-view inferences: for each ordered pair of views (source,
    target), the latent representation of the target view inferred from
    the source view. Rows are only meaningful where the source view is
    available.
    """

    q: Dict[Tuple[int, int], torch.Tensor]

    def sources_for(self, target: int) -> List[int]:
        return sorted(source for source, other in self.q if other == target)
