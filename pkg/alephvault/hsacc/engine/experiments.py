import time
import logging
from typing import Callable, Iterable, List, Optional, Sequence
import pandas as pd
from ..core.seeds import derive_seed, MASK
from ..core.validation import ABLATION_TABLE, LOSS_TERMS
from ..types.dataset import MultiViewDataset, AvailabilityMask
from ..types.training import TrainConfig
from .clustering import evaluate
from .dataio import generate_mask, restrict_views
from .trainer import train


_logger = logging.getLogger(__name__ + ":logger")


# Which lambda controls which loss term.
TERM_LAMBDAS = {"rec": "lambda1", "inf": "lambda2", "mmi": "lambda3", "mmd": "lambda4"}


def _seeds(config: TrainConfig, repeats: int) -> List[int]:
    return [config.seed + offset for offset in range(repeats)]


def _run_cell(description: dict, run: Callable[[], dict]) -> dict:
    """
    Runs one grid cell. Failures are logged and recorded in the row's
    error column, so the other cells still run.
    """

    row = dict(description)
    try:
        row.update(run())
        row["error"] = ""
    except Exception as e:
        _logger.exception(f"Grid cell {description} failed")
        row.update(acc=None, nmi=None, ari=None, inertia=None, error=f"{type(e).__name__}: {e}")
    return row


def train_and_evaluate(config: TrainConfig, ds: MultiViewDataset, mask: AvailabilityMask) -> dict:
    """
    Trains a model and clusters with it, returning the scores and the
    training time (in seconds).
    """

    started = time.perf_counter()
    trained = train(config, ds, mask)
    duration = time.perf_counter() - started
    report = evaluate(trained.model, ds, mask, config)
    return {"acc": report.acc, "nmi": report.nmi, "ari": report.ari, "inertia": report.inertia,
            "train_seconds": duration}


def ablation_tag(subset: Iterable[str]) -> str:
    """
    The M-n tag of a loss-term subset, or its terms joined by '+' when the
    subset is not one of the standard fifteen.
    """

    subset = frozenset(subset)
    for index, entry in enumerate(ABLATION_TABLE, start=1):
        if frozenset(entry) == subset:
            return f"M-{index}"
    return "+".join(term for term in LOSS_TERMS if term in subset)


def subset_config(config: TrainConfig, subset: Iterable[str]) -> TrainConfig:
    """
    The config where the terms outside the subset are disabled (their
    lambda set to 0) and the terms inside it keep their lambda.
    """

    subset = set(subset)
    unknown = subset - set(TERM_LAMBDAS)
    if not subset or unknown:
        raise ValueError(f"Invalid loss-term subset: {sorted(subset)}")
    return config.with_lambdas(**{name: 0.0 for term, name in TERM_LAMBDAS.items() if term not in subset})


def run_ablation(config: TrainConfig, ds: MultiViewDataset, mask: AvailabilityMask,
                 grid: Sequence[Sequence[str]], repeats: int = 1) -> pd.DataFrame:
    """
    Trains and evaluates one model per loss-term subset (and seed), with
    the terms out of the subset disabled. The warm-up still applies to the
    inference term.
    :param config: The base config.
    :param ds: The dataset.
    :param mask: The availability mask.
    :param grid: The subsets, each a nonempty collection of term names.
    :param repeats: How many seeds per subset (seed, seed + 1, ...).
    :return: One row per (subset, seed).
    """

    if not grid:
        raise ValueError("The ablation grid is empty")
    rows = []
    for subset in grid:
        cell_config = subset_config(config, subset)
        for seed in _seeds(config, repeats):
            description = {"model": ablation_tag(subset),
                           "terms": "+".join(term for term in LOSS_TERMS if term in subset), "seed": seed}
            description.update({term: int(term in subset) for term in LOSS_TERMS})
            _logger.info(f"Ablation cell: {description}")
            rows.append(_run_cell(description, lambda: train_and_evaluate(cell_config._replace(seed=seed),
                                                                          ds, mask)))
    return pd.DataFrame(rows)


def run_lambda_sweep(config: TrainConfig, ds: MultiViewDataset, mask: AvailabilityMask,
                     values: Sequence[float], lambdas: Sequence[str] = ("lambda1", "lambda2", "lambda3", "lambda4"),
                     repeats: int = 1) -> pd.DataFrame:
    """
    Varies one lambda at a time over the given values, keeping the others
    at their configured values, and trains and evaluates per grid point.
    :param config: The base config.
    :param ds: The dataset.
    :param mask: The availability mask.
    :param values: The values to try.
    :param lambdas: Which lambdas to sweep.
    :param repeats: How many seeds per grid point.
    :return: One row per (lambda, value, seed).
    """

    if not values or not lambdas:
        raise ValueError("The sweep grid is empty")
    rows = []
    for name in lambdas:
        for value in values:
            cell_config = config.with_lambdas(**{name: value})
            for seed in _seeds(config, repeats):
                description = {"lambda": name, "value": float(value), "seed": seed}
                description.update({f"lambda{index + 1}": weight for index, weight in enumerate(cell_config.lambdas)})
                _logger.info(f"Sweep cell: {description}")
                rows.append(_run_cell(description, lambda: train_and_evaluate(cell_config._replace(seed=seed),
                                                                              ds, mask)))
    return pd.DataFrame(rows)


def run_missing_rate_sweep(config: TrainConfig, ds: MultiViewDataset, rates: Sequence[float],
                           repeats: int = 1) -> pd.DataFrame:
    """
    For each missing rate and seed, draws a fresh mask (from the seed),
    then trains and evaluates.
    :param config: The base config.
    :param ds: The dataset.
    :param rates: The missing rates.
    :param repeats: How many seeds per rate.
    :return: One row per (rate, seed).
    """

    if not rates:
        raise ValueError("No missing rates to try")
    rows = []
    for rate in rates:
        for seed in _seeds(config, repeats):
            description = {"missing_rate": float(rate), "seed": seed}
            _logger.info(f"Missing-rate cell: {description}")

            def run():
                mask = generate_mask(ds.n, ds.v, rate, derive_seed(seed, MASK))
                return dict(train_and_evaluate(config._replace(seed=seed, missing_rate=rate), ds, mask),
                            incomplete=mask.incomplete_count())

            rows.append(_run_cell(description, run))
    return pd.DataFrame(rows)


def run_view_scaling(config: TrainConfig, ds: MultiViewDataset, mask: AvailabilityMask,
                     counts: Optional[Sequence[int]] = None, repeats: int = 1) -> pd.DataFrame:
    """
    Trains and evaluates on the first m views, for each m in the counts,
    telling how the training time and the scores change with the number
    of views.
    :param config: The base config.
    :param ds: The dataset.
    :param mask: The availability mask. Samples with none of the kept
      views are left out of that count's run.
    :param counts: The view counts (all from 2 to V when empty).
    :param repeats: How many seeds per count.
    :return: One row per (count, seed).
    """

    counts = list(counts or range(2, ds.v + 1))
    invalid = [count for count in counts if not 2 <= count <= ds.v]
    if invalid:
        raise ValueError(f"View counts must be within [2, {ds.v}], got {invalid}")
    rows = []
    for count in counts:
        kept = list(range(count))
        view_ds, view_mask = restrict_views(ds, mask, kept)
        for seed in _seeds(config, repeats):
            description = {"views": count, "seed": seed}
            _logger.info(f"View-scaling cell: {description}")
            rows.append(_run_cell(description, lambda: train_and_evaluate(config._replace(seed=seed),
                                                                          view_ds, view_mask)))
    return pd.DataFrame(rows)


def failed_cells(table: pd.DataFrame) -> int:
    if "error" not in table.columns:
        return 0
    return int((table["error"].fillna("") != "").sum())
