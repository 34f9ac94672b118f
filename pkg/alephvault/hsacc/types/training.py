import math
from typing import NamedTuple, Tuple, List, Optional, Any


class TrainConfig(NamedTuple):
    """
    Everything the training loop and the final clustering need. Built from
    a validated configuration document (see `TrainConfig.from_document`),
    and never mutated: use `_replace` to derive variants.
    """

    lambdas: Tuple[float, float, float, float] = (0.1, 0.1, 10.0, 1.0)
    epochs: int = 500
    warmup: int = 100
    lr: float = 1e-4
    batch_size: int = 256
    latent_dim: int = 128
    encoder_dims: Tuple[int, ...] = (1024, 1024, 1024)
    inference_dims: Tuple[int, ...] = (256, 128, 256)
    activation: str = "relu"
    kernel: str = "linear"
    bandwidth: float = 0.0
    grad_clip: float = 5.0
    seed: int = 0
    eval_every: int = 10
    ckpt_every: int = 0
    k: int = 0
    restarts: int = 50
    max_iter: int = 300
    tol: float = 1e-4
    normalize: bool = True
    missing_rate: float = 0.5

    @classmethod
    def from_document(cls, document: dict) -> "TrainConfig":
        """
        Builds a config from a validated (normalized) configuration
        document, which has the data, model, train and eval sections.
        :param document: The normalized document.
        :return: The config.
        """

        data, model, train, eval_ = document["data"], document["model"], document["train"], document["eval"]
        return cls(
            lambdas=(train["lambda1"], train["lambda2"], train["lambda3"], train["lambda4"]),
            epochs=train["epochs"], warmup=train["warmup"], lr=train["lr"], batch_size=train["batch_size"],
            latent_dim=model["latent_dim"], encoder_dims=tuple(model["encoder_dims"]),
            inference_dims=tuple(model["inference_dims"]), activation=model["activation"],
            kernel=model["kernel"], bandwidth=model["bandwidth"], grad_clip=train["grad_clip"],
            seed=train["seed"], eval_every=train["eval_every"], ckpt_every=train["ckpt_every"],
            k=eval_["k"], restarts=eval_["restarts"], max_iter=eval_["max_iter"], tol=eval_["tol"],
            normalize=data["normalize"], missing_rate=data["missing_rate"],
        )

    def check(self):
        """
        Checks the cross-field invariants the schema cannot express.
        """

        if self.warmup > self.epochs:
            raise ValueError(f"warmup ({self.warmup}) must not exceed epochs ({self.epochs})")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if any(value < 0 or not math.isfinite(value) for value in self.lambdas):
            raise ValueError(f"lambdas must be finite and non-negative: {self.lambdas}")
        if self.kernel not in ("linear", "rbf"):
            raise ValueError(f"Unknown kernel: {self.kernel}")
        return self

    def with_lambdas(self, **changes: float) -> "TrainConfig":
        """
        Derives a config with some lambdas changed, given as lambda1=...,
        lambda4=... keyword arguments.
        """

        lambdas = list(self.lambdas)
        for key, value in changes.items():
            lambdas[int(key[-1]) - 1] = float(value)
        return self._replace(lambdas=tuple(lambdas))


class LossTerms(NamedTuple):
    """
    The per-batch (or per-epoch mean) values of the four loss terms and
    their weighted total.
    """

    rec: float
    inf: float
    mmi: float
    mmd: float
    total: float

    NAMES = ("rec", "inf", "mmi", "mmd")

    @classmethod
    def combine(cls, rec: float, inf: float, mmi: float, mmd: float,
                lambdas: Tuple[float, float, float, float]) -> "LossTerms":
        total = lambdas[0] * rec + lambdas[1] * inf + lambdas[2] * mmi + lambdas[3] * mmd
        return cls(rec, inf, mmi, mmd, total)

    @classmethod
    def mean(cls, terms: List["LossTerms"], lambdas: Tuple[float, float, float, float]) -> "LossTerms":
        """
        The term-wise mean of a list of terms. Since the total is linear
        in the terms, the mean total is recomputed from the mean terms.
        """

        if not terms:
            return cls.combine(0.0, 0.0, 0.0, 0.0, lambdas)
        count = len(terms)
        return cls.combine(*(sum(getattr(t, name) for t in terms) / count for name in cls.NAMES), lambdas)

    def component(self, name: str) -> float:
        return getattr(self, name)


class EpochRecord(NamedTuple):
    """
    One row of the training history.
    """

    epoch: int
    terms: LossTerms
    weights: Tuple[float, ...]
    acc: Optional[float] = None
    nmi: Optional[float] = None
    ari: Optional[float] = None


class TrainedModel(NamedTuple):
    """
    The outcome of a training run: the model (an `HsaccModel`), the config
    it was trained with and its per-epoch history.
    """

    model: Any
    config: TrainConfig
    history: List[EpochRecord]

    @property
    def final(self) -> Optional[EpochRecord]:
        return self.history[-1] if self.history else None
