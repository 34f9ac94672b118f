import numpy as np
import pytest
from alephvault.hsacc.engine.dataio import synth_gaussian, generate_mask, save_dataset
from alephvault.hsacc.types.training import TrainConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the slow end-to-end runs")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long end-to-end training runs (enable with --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def dataset():
    return synth_gaussian(80, 3, [6, 5], 10.0, 0.3, 3)


@pytest.fixture
def half_mask(dataset):
    return generate_mask(dataset.n, dataset.v, 0.5, 11)


@pytest.fixture
def tiny_config():
    return TrainConfig(epochs=4, warmup=1, lr=1e-3, batch_size=32, latent_dim=6, encoder_dims=(12,),
                       inference_dims=(8,), eval_every=0, restarts=3, seed=5)


@pytest.fixture
def data_dir(tmp_path, dataset):
    path = tmp_path / "data"
    save_dataset(dataset, str(path))
    return path

