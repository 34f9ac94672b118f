import os
import time
import logging
import functools
from typing import Callable, Optional, Tuple
import click
from . import __version__
from .core.formats import MASK_FILE, HISTORY_FILE, CHECKPOINT_FILE, LOSS_CURVES_FILE
from .core.seeds import derive_seed, SYNTH, MASK
from .engine.artifacts import (write_report, write_manifest, write_predictions, write_embeddings, write_table,
                               plot_history)
from .engine.clustering import evaluate, scorer, completed_representation
from .engine.config import ImproperlyConfiguredError, load_config, config_digest
from .engine.dataio import (DatasetFormatError, load_dataset, save_dataset, load_mask, save_mask, generate_mask,
                            synth_gaussian, content_hash, dataset_files)
from .engine.experiments import (run_ablation, run_lambda_sweep, run_missing_rate_sweep, run_view_scaling,
                                 failed_cells)
from .engine.network import load_checkpoint
from .engine.trainer import TrainingDivergedError, train, write_history
from .types.dataset import MultiViewDataset, AvailabilityMask
from .types.reports import RunManifest


_logger = logging.getLogger(__name__ + ":logger")
VALIDATION_EXIT = 1
RUNTIME_EXIT = 2


class ValidationFailure(click.ClickException):
    """
    Bad flags, settings or input files.
    """

    exit_code = VALIDATION_EXIT


class RuntimeFailure(click.ClickException):
    """
    Anything going wrong while running (e.g. a diverging training, or a
    failed grid cell).
    """

    exit_code = RUNTIME_EXIT


class HsaccGroup(click.Group):
    """
    A command group reporting usage errors with the validation exit code.
    """

    def make_context(self, *args, **kwargs):
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as e:
            e.exit_code = VALIDATION_EXIT
            raise

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = VALIDATION_EXIT
            raise


def _reporting_errors(f: Callable):
    """
    Turns the domain errors into click exceptions with the proper exit
    code. Unexpected errors are logged with their traceback.
    :param f: The command function.
    :return: The wrapped function.
    """

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except click.ClickException:
            raise
        except (ImproperlyConfiguredError, DatasetFormatError, ValueError) as e:
            raise ValidationFailure(str(e))
        except TrainingDivergedError as e:
            _logger.error(str(e))
            raise RuntimeFailure(str(e))
        except Exception as e:
            _logger.exception("An unexpected error occurred")
            raise RuntimeFailure(f"{type(e).__name__}: {e}")

    return wrapper


def _parse_dims(ctx, param, value: str):
    try:
        dims = [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got '{value}'")
    if not dims or any(dim < 1 for dim in dims):
        raise click.BadParameter(f"expected positive dimensions, got '{value}'")
    return dims


_config_option = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                              help="INI settings file ([data], [model], [train], [eval]).")
_data_option = click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False),
                            help="Dataset directory (view_<v>.csv, optional labels.csv).")
_mask_option = click.option("--mask", "mask_path", type=click.Path(dir_okay=False),
                            help="Availability mask (mask.csv). Drawn from data.missing_rate when absent.")
_out_option = click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
                           help="Output directory.")
_seed_option = click.option("--seed", type=int, default=None, help="Overrides train.seed.")
_set_option = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                           help="Overrides a setting (bare or section.key). Repeatable.")


def _run_options(f: Callable):
    for option in reversed([_config_option, _data_option, _mask_option, _out_option, _seed_option, _set_option]):
        f = option(f)
    return f


class _Inputs:
    """
    Everything a pipeline command reads: the settings (the validated
    document and the config built from it), the dataset and the mask.
    """

    def __init__(self, config_path: Optional[str], data_dir: str, mask_path: Optional[str], out_dir: str,
                 seed: Optional[int], overrides: Tuple[str, ...]):
        self.document, self.config = load_config(config_path, overrides, seed)
        self.data_dir = data_dir
        self.dataset: MultiViewDataset = load_dataset(data_dir)
        os.makedirs(out_dir, exist_ok=True)
        self.out_dir = out_dir
        if mask_path:
            self.mask_path = mask_path
            self.mask: AvailabilityMask = load_mask(mask_path, self.dataset.n, self.dataset.v)
        else:
            # The drawn mask is kept with the outputs.
            self.mask = generate_mask(self.dataset.n, self.dataset.v, self.config.missing_rate,
                                      derive_seed(self.config.seed, MASK))
            self.mask_path = os.path.join(out_dir, MASK_FILE)
            save_mask(self.mask, self.mask_path)
        self.started = time.perf_counter()

    def manifest(self, command: str) -> RunManifest:
        return RunManifest(command, self.document, os.path.abspath(self.data_dir),
                           content_hash(dataset_files(self.data_dir)), content_hash([self.mask_path]),
                           __version__, self.config.seed, time.perf_counter() - self.started)


def _write_evaluation(inputs: _Inputs, model, command: str):
    report = evaluate(model, inputs.dataset, inputs.mask, inputs.config)
    write_report(report, config_digest(inputs.document), inputs.out_dir)
    write_predictions(report, inputs.out_dir)
    write_embeddings(*completed_representation(model, inputs.dataset, inputs.mask, inputs.config), inputs.out_dir)
    write_manifest(inputs.manifest(command), inputs.out_dir)
    if report.acc is not None:
        click.echo(f"ACC={report.acc:.4f} NMI={report.nmi:.4f} ARI={report.ari:.4f}")
    else:
        click.echo(f"Clustered into {report.k} clusters (inertia={report.inertia:.6g})")


def _finish_grid(table, path: str):
    write_table(table, path)
    failures = failed_cells(table)
    click.echo(f"Wrote {len(table)} rows to {path}")
    if failures:
        raise RuntimeFailure(f"{failures} of {len(table)} cells failed (see the error column of {path})")


@click.group(cls=HsaccGroup)
@click.version_option(__version__, prog_name="hsacc")
@click.option("--debug", is_flag=True, help="Debug-level logging.")
def cli(debug: bool):
    """
    Incomplete multi-view clustering: hierarchical semantic alignment and
    cooperative completion.
    """

    logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s %(message)s")
    logging.getLogger().setLevel(logging.DEBUG if debug else logging.INFO)


@cli.command()
@click.option("--n", type=click.IntRange(min=2), required=True, help="Sample count.")
@click.option("--k", type=click.IntRange(min=2), required=True, help="Cluster count.")
@click.option("--dims", callback=_parse_dims, required=True, help="Per-view dimensions, e.g. 10,10.")
@click.option("--sep", type=click.FloatRange(min=0, min_open=True), default=10.0, show_default=True,
              help="Distance between cluster centers.")
@click.option("--noise", type=click.FloatRange(min=0), default=0.5, show_default=True,
              help="Standard deviation of the per-sample noise.")
@click.option("--seed", type=int, default=0, show_default=True)
@_out_option
@_reporting_errors
def synth(n: int, k: int, dims, sep: float, noise: float, seed: int, out_dir: str):
    """
    Writes a labelled synthetic dataset of Gaussian clusters.
    """

    if n < k:
        raise click.UsageError(f"--n ({n}) must be at least --k ({k})")
    dataset = synth_gaussian(n, k, dims, sep, noise, derive_seed(seed, SYNTH))
    save_dataset(dataset, out_dir)
    click.echo(f"Wrote {n} samples, {len(dims)} views, {k} clusters to {out_dir}")


@cli.command()
@click.option("--data", "data_dir", type=click.Path(file_okay=False), help="Dataset directory (for N and V).")
@click.option("--n", type=click.IntRange(min=1), help="Sample count (without --data).")
@click.option("--v", type=click.IntRange(min=2), help="View count (without --data).")
@click.option("--rate", type=click.FloatRange(min=0, max=1, max_open=True), required=True,
              help="Fraction of incomplete samples, in [0, 1).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              help="Output directory (the dataset directory by default).")
@_reporting_errors
def mask(data_dir: Optional[str], n: Optional[int], v: Optional[int], rate: float, seed: int,
         out_dir: Optional[str]):
    """
    Draws an availability mask and writes it as mask.csv.
    """

    if data_dir:
        dataset = load_dataset(data_dir)
        n, v = dataset.n, dataset.v
    elif n is None or v is None:
        raise click.UsageError("Either --data or both --n and --v are required")
    out_dir = out_dir or data_dir
    if not out_dir:
        raise click.UsageError("--out is required without --data")
    os.makedirs(out_dir, exist_ok=True)
    generated = generate_mask(n, v, rate, derive_seed(seed, MASK))
    save_mask(generated, os.path.join(out_dir, MASK_FILE))
    click.echo(f"Wrote a mask with {generated.incomplete_count()} incomplete samples out of {n}")


@cli.command("train")
@_run_options
@click.option("--plot", is_flag=True, help="Also render the loss curves.")
@_reporting_errors
def train_command(config_path, data_dir, mask_path, out_dir, seed, overrides, plot: bool):
    """
    Trains a model, then clusters the completed representation. Writes the
    checkpoint, history.csv, report.json, the embeddings and the manifest.
    """

    inputs = _Inputs(config_path, data_dir, mask_path, out_dir, seed, overrides)
    trained = train(inputs.config, inputs.dataset, inputs.mask, out_dir,
                    scorer(inputs.dataset, inputs.mask, inputs.config))
    history_path = os.path.join(out_dir, HISTORY_FILE)
    write_history(trained.history, history_path)
    _write_evaluation(inputs, trained.model, "train")
    if plot:
        plot_history(history_path, os.path.join(out_dir, LOSS_CURVES_FILE))


@cli.command("evaluate")
@_run_options
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True, dir_okay=False),
              help="The model file (model.pt in --out by default).")
@_reporting_errors
def evaluate_command(config_path, data_dir, mask_path, out_dir, seed, overrides, checkpoint_path):
    """
    Clusters with a trained model. Writes report.json, the embeddings and
    the completed latents.
    """

    inputs = _Inputs(config_path, data_dir, mask_path, out_dir, seed, overrides)
    checkpoint_path = checkpoint_path or os.path.join(out_dir, CHECKPOINT_FILE)
    if not os.path.isfile(checkpoint_path):
        raise ValidationFailure(f"Checkpoint not found: {checkpoint_path}")
    model, _ = load_checkpoint(checkpoint_path)
    if model.dims != inputs.dataset.dims:
        raise ValidationFailure(f"The checkpoint expects views of dims {model.dims}, "
                                f"the dataset has {inputs.dataset.dims}")
    _write_evaluation(inputs, model, "evaluate")


@cli.command()
@_run_options
@_reporting_errors
def ablate(config_path, data_dir, mask_path, out_dir, seed, overrides):
    """
    Trains and evaluates one model per loss-term subset of eval.ablation.
    Writes ablation.csv.
    """

    inputs = _Inputs(config_path, data_dir, mask_path, out_dir, seed, overrides)
    table = run_ablation(inputs.config, inputs.dataset, inputs.mask, inputs.document["eval"]["ablation"],
                         inputs.document["eval"]["repeats"])
    write_manifest(inputs.manifest("ablate"), out_dir)
    _finish_grid(table, os.path.join(out_dir, "ablation.csv"))


@cli.command()
@_run_options
@_reporting_errors
def sweep(config_path, data_dir, mask_path, out_dir, seed, overrides):
    """
    Varies each lambda of eval.sweep_lambdas over eval.sweep_values, one at
    a time. Writes sweep.csv.
    """

    inputs = _Inputs(config_path, data_dir, mask_path, out_dir, seed, overrides)
    evaluation = inputs.document["eval"]
    table = run_lambda_sweep(inputs.config, inputs.dataset, inputs.mask, evaluation["sweep_values"],
                             evaluation["sweep_lambdas"], evaluation["repeats"])
    write_manifest(inputs.manifest("sweep"), out_dir)
    _finish_grid(table, os.path.join(out_dir, "sweep.csv"))


@cli.command()
@_run_options
@_reporting_errors
def rates(config_path, data_dir, mask_path, out_dir, seed, overrides):
    """
    Trains and evaluates under each missing rate of eval.missing_rates,
    drawing a fresh mask per rate and seed. Writes rates.csv.
    """

    inputs = _Inputs(config_path, data_dir, mask_path, out_dir, seed, overrides)
    evaluation = inputs.document["eval"]
    table = run_missing_rate_sweep(inputs.config, inputs.dataset, evaluation["missing_rates"],
                                   evaluation["repeats"])
    write_manifest(inputs.manifest("rates"), out_dir)
    _finish_grid(table, os.path.join(out_dir, "rates.csv"))


@cli.command()
@_run_options
@_reporting_errors
def views(config_path, data_dir, mask_path, out_dir, seed, overrides):
    """
    Trains and evaluates on the first m views, for each m of
    eval.view_counts (2 to V by default). Writes views.csv.
    """

    inputs = _Inputs(config_path, data_dir, mask_path, out_dir, seed, overrides)
    evaluation = inputs.document["eval"]
    table = run_view_scaling(inputs.config, inputs.dataset, inputs.mask, evaluation["view_counts"],
                             evaluation["repeats"])
    write_manifest(inputs.manifest("views"), out_dir)
    _finish_grid(table, os.path.join(out_dir, "views.csv"))


@cli.command()
@click.argument("history_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="The SVG file (loss_curves.svg next to the history by default).")
@click.option("--title", help="Figure title.")
@_reporting_errors
def plot(history_path: str, out_path: Optional[str], title: Optional[str]):
    """
    Renders the loss (and metric) curves of a history.csv file as SVG.
    """

    out_path = out_path or os.path.join(os.path.dirname(os.path.abspath(history_path)), LOSS_CURVES_FILE)
    click.echo(f"Wrote {plot_history(history_path, out_path, title)}")


def main():
    cli(prog_name="hsacc")


if __name__ == "__main__":
    main()
