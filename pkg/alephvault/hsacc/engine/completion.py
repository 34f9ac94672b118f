import logging
from typing import Dict, List, Optional, Sequence, Tuple
import numpy as np
import torch
from ..types.dataset import AvailabilityMask
from ..types.latent import CompletionOutputs
from .network import Mlp, HsaccModel, forward


_logger = logging.getLogger(__name__ + ":logger")


def infer_cross_view(head: Mlp, z_source: torch.Tensor) -> torch.Tensor:
    """
    Infers the target view's latents out of the source view's latents.
    :param head: The inference head of the (source, target) pair.
    :param z_source: The source latents, N x D.
    :return: The inferred target latents, N x D.
    """

    if head.in_dim != head.out_dim:
        raise ValueError(f"dimension mismatch: inference heads map D to D, got {head.in_dim} -> {head.out_dim}")
    return forward(head, z_source)


def infer_all(model: HsaccModel, latents: Sequence[torch.Tensor]) -> CompletionOutputs:
    """
    Runs every inference head over the latents of its source view.
    """

    return CompletionOutputs({
        (source, target): infer_cross_view(model.head(source, target), latents[source])
        for source, target in model.pairs()
    })


def inference_loss(latents: Sequence[torch.Tensor], outputs: CompletionOutputs,
                   pair_masks: Optional[Dict[Tuple[int, int], torch.Tensor]] = None) -> torch.Tensor:
    """
    The inference consistency loss: for each ordered pair of views, the
    mean squared distance (summed over features) between the target
    latents and the ones inferred from the source, over the samples where
    both views are available; then averaged over the V(V-1) ordered pairs.
    Each pair is averaged over its own selection count, so pairs sharing
    fewer samples still weigh the same.
    A pair whose selection is empty contributes 0.
    :param latents: The V latent matrices.
    :param outputs: The cross-view inferences.
    :param pair_masks: For each ordered pair, the boolean row selection
      (all rows when absent).
    :return: The scalar loss.
    """

    v = len(latents)
    if v < 2:
        raise ValueError(f"At least 2 views are needed, got {v}")
    total = latents[0].new_zeros(())
    for (source, target), inferred in sorted(outputs.q.items()):
        if inferred.shape != latents[target].shape:
            raise ValueError(f"shape mismatch: inferred {tuple(inferred.shape)}, "
                             f"target {tuple(latents[target].shape)}")
        rows = None if pair_masks is None else pair_masks.get((source, target))
        target_rows, inferred_rows = latents[target], inferred
        if rows is not None:
            if not bool(rows.any()):
                _logger.debug(f"No samples with both views {source} and {target}: the pair contributes 0")
                continue
            target_rows, inferred_rows = target_rows[rows], inferred_rows[rows]
        total = total + (target_rows - inferred_rows).pow(2).sum(dim=1).mean()
    return total / (v * (v - 1))


def complete_latents(latents: Sequence[torch.Tensor], outputs: CompletionOutputs,
                     mask: AvailabilityMask) -> List[torch.Tensor]:
    """
    Fills the latents of the missing (sample, view) entries with the mean
    of the inferences from every view available for that sample. The
    available entries are kept untouched.
    :param latents: The V latent matrices (rows of missing entries hold
      anything).
    :param outputs: The cross-view inferences.
    :param mask: The availability mask.
    :return: The completed latent matrices.
    """

    entries = torch.as_tensor(np.asarray(mask.entries) > 0)
    completed = []
    for target, latent in enumerate(latents):
        missing = ~entries[:, target]
        if not bool(missing.any()):
            completed.append(latent)
            continue
        total = torch.zeros_like(latent)
        count = torch.zeros(latent.shape[0], 1, dtype=latent.dtype)
        for source in outputs.sources_for(target):
            available = entries[:, source].unsqueeze(1).to(latent.dtype)
            total = total + torch.where(available > 0, outputs.q[(source, target)], torch.zeros_like(latent))
            count = count + available
        filled = total / count.clamp(min=1)
        completed.append(torch.where(missing.unsqueeze(1), filled, latent))
    return completed
