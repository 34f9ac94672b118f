import os
import logging
from alephvault.hsacc.core.seeds import derive_seed, SYNTH, MASK
from alephvault.hsacc.engine.clustering import evaluate, scorer
from alephvault.hsacc.engine.config import load_config
from alephvault.hsacc.engine.dataio import synth_gaussian, generate_mask
from alephvault.hsacc.engine.trainer import train, write_history


logging.basicConfig(level=logging.INFO)


def main():
    document, config = load_config(os.path.join(os.path.dirname(__file__), "hsacc.ini"))
    dataset = synth_gaussian(1000, 4, [10, 10], 10.0, 0.5, derive_seed(config.seed, SYNTH))
    mask = generate_mask(dataset.n, dataset.v, config.missing_rate, derive_seed(config.seed, MASK))
    trained = train(config, dataset, mask, evaluator=scorer(dataset, mask, config))
    write_history(trained.history, "history.csv")
    report = evaluate(trained.model, dataset, mask, config)
    print(f"ACC={report.acc:.4f} NMI={report.nmi:.4f} ARI={report.ari:.4f}")


if __name__ == '__main__':
    main()
