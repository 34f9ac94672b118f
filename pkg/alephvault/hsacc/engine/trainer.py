import os
import math
import logging
from typing import Callable, List, Optional, Sequence, Tuple
import numpy as np
import pandas as pd
import torch
from torch.nn import functional
from ..core.formats import FLOAT_FORMAT, CHECKPOINT_FILE, EPOCH_CHECKPOINT_FILE
from ..core.seeds import derive_seed, INIT, SHUFFLE
from ..types.dataset import MultiViewDataset, AvailabilityMask
from ..types.training import TrainConfig, LossTerms, EpochRecord, TrainedModel
from .alignment import pairwise_mi_loss, estimate_weights, fuse, mmd_alignment_loss
from .completion import infer_all, inference_loss
from .dataio import masked_views
from .network import HsaccModel, gradients, make_optimizer, adam_step, save_checkpoint


_logger = logging.getLogger(__name__ + ":logger")


class TrainingDivergedError(Exception):
    """
    Raised when a loss becomes non-finite during training. Tells the
    (1-based) epoch and the (0-based) batch where it happened.
    """

    def __init__(self, epoch: int, batch: int, terms: Optional[LossTerms] = None):
        self.epoch = epoch
        self.batch = batch
        self.terms = terms
        super().__init__(f"Training diverged at epoch {epoch}, batch {batch}: {terms}")


def total_loss(terms: Sequence[float], lambdas: Sequence[float]) -> float:
    """
    The weighted objective: lambda1 * rec + lambda2 * inf + lambda3 * mmi +
    lambda4 * mmd.
    :param terms: The (rec, inf, mmi, mmd) values.
    :param lambdas: The four trade-off weights.
    :return: The total.
    """

    terms = [float(term) for term in terms]
    if len(terms) != 4 or len(lambdas) != 4:
        raise ValueError("Expected four loss terms and four lambdas")
    if not all(math.isfinite(term) for term in terms):
        raise ValueError(f"non-finite loss component: {terms}")
    return LossTerms.combine(*terms, tuple(float(value) for value in lambdas)).total


def batch_losses(model: HsaccModel, views: Sequence[torch.Tensor], available: torch.Tensor,
                 config: TrainConfig, use_inference: bool) -> Tuple[List[torch.Tensor], Optional[torch.Tensor]]:
    """
    Computes the four loss terms over one batch. Every term only reads the
    (sample, view) entries that are available.
    :param model: The model.
    :param views: The batch rows of every view.
    :param available: The batch rows of the availability mask (booleans).
    :param config: The training config.
    :param use_inference: Whether the warm-up is over.
    :return: The (rec, inf, mmi, mmd) tensors, and the batch's view weights
      (None if the batch has no complete sample).
    """

    latents = model.encode(views)
    zero = latents[0].new_zeros(())
    rows = [available[:, index] for index in range(model.v)]

    # Reconstruction, per view, over the samples having that view.
    rec = zero
    for view, reconstructed, selected in zip(views, model.reconstruct(latents), rows):
        if bool(selected.any()):
            rec = rec + functional.mse_loss(reconstructed[selected], view[selected])

    mmi = pairwise_mi_loss(latents, rows)

    # Weights, fusion and distribution alignment over the complete samples.
    complete = available.all(dim=1)
    weights = None
    mmd = zero
    if bool(complete.any()):
        subset = [latent[complete] for latent in latents]
        weights = estimate_weights(subset)
        mmd = mmd_alignment_loss(subset, fuse(subset, weights).h, config.kernel, config.bandwidth)
    else:
        _logger.debug("Batch without complete samples: no alignment terms")

    inf = zero
    if use_inference:
        pair_masks = {(source, target): rows[source] & rows[target] for source, target in model.pairs()}
        inf = inference_loss(latents, infer_all(model, latents), pair_masks)
    return [rec, inf, mmi, mmd], None if weights is None else weights.w


def _objective(terms: Sequence[torch.Tensor], lambdas: Sequence[float]) -> Optional[torch.Tensor]:
    # Disabled terms stay out of the graph.
    active = [value * term for value, term in zip(lambdas, terms) if value > 0]
    if not active:
        return None
    return torch.stack(active).sum()


def history_rows(history: Sequence[EpochRecord]) -> List[dict]:
    """
    The history as flat rows: epoch, the loss terms, the total, one weight
    column per view and the metrics (None where not evaluated).
    """

    rows = []
    for record in history:
        row = {"epoch": record.epoch}
        row.update({name: record.terms.component(name) for name in ("rec", "inf", "mmi", "mmd", "total")})
        row.update({f"w_{index}": weight for index, weight in enumerate(record.weights)})
        row.update(acc=record.acc, nmi=record.nmi, ari=record.ari)
        rows.append(row)
    return rows


def write_history(history: Sequence[EpochRecord], path: str):
    frame = pd.DataFrame(history_rows(history))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")


def train(config: TrainConfig, ds: MultiViewDataset, mask: AvailabilityMask,
          checkpoint_dir: Optional[str] = None,
          evaluator: Optional[Callable[[HsaccModel], Tuple[float, float, float]]] = None) -> TrainedModel:
    """
    Trains the autoencoders and the inference heads jointly. Each epoch
    walks the samples in a seeded random order, batch by batch, taking one
    clipped Adam step per batch on the weighted objective. The inference
    term is off during the first `warmup` epochs.
    :param config: The training config.
    :param ds: The dataset.
    :param mask: The availability mask (same shape as the dataset).
    :param checkpoint_dir: Where to write checkpoints, if anywhere: every
      `ckpt_every` epochs (when positive), and at the end.
    :param evaluator: A callable scoring the model as (acc, nmi, ari),
      invoked every `eval_every` epochs (when positive).
    :return: The trained model and its history.
    """

    ds.check()
    mask.check(ds.n, ds.v)
    config.check()
    if ds.v < 2:
        raise ValueError(f"At least 2 views are needed, got {ds.v}")

    views = [torch.as_tensor(view, dtype=torch.float32) for view in masked_views(ds, mask, config.normalize)]
    available = torch.as_tensor(np.asarray(mask.entries) > 0)
    model = HsaccModel(ds.dims, config.latent_dim, config.encoder_dims, config.inference_dims,
                       config.activation, derive_seed(config.seed, INIT))
    parameters = list(model.parameters())
    state = make_optimizer(parameters, config.lr)
    shuffle_seed = derive_seed(config.seed, SHUFFLE)
    _logger.info(f"Training on N={ds.n}, V={ds.v}, dims={ds.dims} ({mask.incomplete_count()} incomplete "
                 f"samples) for {config.epochs} epochs, lambdas={config.lambdas}")

    history = []
    for epoch in range(config.epochs):
        use_inference = epoch >= config.warmup
        order = np.random.default_rng((shuffle_seed, epoch)).permutation(ds.n)
        epoch_terms, epoch_weights = [], []
        for batch, start in enumerate(range(0, ds.n, config.batch_size)):
            rows = torch.as_tensor(order[start:start + config.batch_size])
            tensors, weights = batch_losses(model, [view[rows] for view in views], available[rows],
                                            config, use_inference)
            terms = LossTerms.combine(*(tensor.detach().item() for tensor in tensors), config.lambdas)
            if not all(math.isfinite(value) for value in terms):
                raise TrainingDivergedError(epoch + 1, batch, terms)

            objective = _objective(tensors, config.lambdas)
            if objective is not None and objective.requires_grad:
                value = objective.detach().item()
                if not math.isclose(value, terms.total, rel_tol=1e-4, abs_tol=1e-5):
                    _logger.warning(f"Objective {value} differs from the weighted terms {terms.total}")
                adam_step(parameters, gradients(objective, parameters), state, config.lr, config.grad_clip)

            _logger.debug(f"Epoch {epoch + 1}, batch {batch}: {terms}")
            epoch_terms.append(terms)
            if weights is not None:
                epoch_weights.append(weights.numpy())

        mean_weights = np.mean(epoch_weights, axis=0) if epoch_weights else np.full(ds.v, 1.0 / ds.v)
        record = EpochRecord(epoch + 1, LossTerms.mean(epoch_terms, config.lambdas),
                             tuple(float(weight) for weight in mean_weights))
        if evaluator is not None and config.eval_every > 0 and (epoch + 1) % config.eval_every == 0:
            acc, nmi, ari = evaluator(model)
            record = record._replace(acc=acc, nmi=nmi, ari=ari)
        history.append(record)
        _logger.info(f"Epoch {epoch + 1}/{config.epochs}: rec={record.terms.rec:.6g} inf={record.terms.inf:.6g} "
                     f"mmi={record.terms.mmi:.6g} mmd={record.terms.mmd:.6g} total={record.terms.total:.6g} "
                     f"weights={[round(weight, 4) for weight in record.weights]}")

        if checkpoint_dir and config.ckpt_every > 0 and (epoch + 1) % config.ckpt_every == 0:
            save_checkpoint(model, os.path.join(checkpoint_dir, EPOCH_CHECKPOINT_FILE.format(epoch + 1)),
                            {"epoch": epoch + 1})

    if checkpoint_dir:
        save_checkpoint(model, os.path.join(checkpoint_dir, CHECKPOINT_FILE), {"epoch": config.epochs})
    return TrainedModel(model, config, history)
