import os
from cerberus import schema_registry
from ..core.validation import HsaccValidator, LOSS_TERMS


_LAMBDA_NAMES = ["lambda1", "lambda2", "lambda3", "lambda4"]


DATA = {
    "normalize": {
        "type": "boolean",
        "default": True
    },
    "missing_rate": {
        "type": "float",
        "default": 0.5,
        "min": 0.0,
        "max": 0.999999
    }
}


MODEL = {
    "latent_dim": {
        "type": "integer",
        "default": 128,
        "min": 1
    },
    "encoder_dims": {
        "type": "list",
        "coerce": "str2ints",
        "default_setter": lambda doc: [1024, 1024, 1024],
        "schema": {"type": "integer", "min": 1}
    },
    "inference_dims": {
        "type": "list",
        "coerce": "str2ints",
        "default_setter": lambda doc: [256, 128, 256],
        "schema": {"type": "integer", "min": 1}
    },
    "activation": {
        "type": "string",
        "default": "relu",
        "allowed": ["relu", "tanh", "sigmoid", "leaky_relu"]
    },
    "kernel": {
        "type": "string",
        "default": "linear",
        "allowed": ["linear", "rbf"]
    },
    "bandwidth": {
        # Zero means: use the median heuristic on every batch.
        "type": "float",
        "default": 0.0,
        "min": 0.0
    }
}


TRAIN = {
    "lambda1": {"type": "float", "default": 0.1, "min": 0.0},
    "lambda2": {"type": "float", "default": 0.1, "min": 0.0},
    "lambda3": {"type": "float", "default": 10.0, "min": 0.0},
    "lambda4": {"type": "float", "default": 1.0, "min": 0.0},
    "epochs": {
        "type": "integer",
        "min": 1,
        "default_setter": lambda doc: int(os.getenv("HSACC_EPOCHS", "500"))
    },
    "warmup": {
        "type": "integer",
        "default": 100,
        "min": 0
    },
    "lr": {
        "type": "float",
        "default": 1e-4,
        "min": 0.0
    },
    "batch_size": {
        "type": "integer",
        "default": 256,
        "min": 2
    },
    "grad_clip": {
        # Zero disables the clipping.
        "type": "float",
        "default": 5.0,
        "min": 0.0
    },
    "seed": {
        "type": "integer",
        "default_setter": lambda doc: int(os.getenv("HSACC_SEED", "0"))
    },
    "eval_every": {
        "type": "integer",
        "default": 10,
        "min": 0
    },
    "ckpt_every": {
        "type": "integer",
        "default": 0,
        "min": 0
    }
}


EVAL = {
    "k": {
        # Zero means: as many clusters as ground-truth classes.
        "type": "integer",
        "default": 0,
        "min": 0
    },
    "restarts": {
        "type": "integer",
        "default": 50,
        "min": 1
    },
    "max_iter": {
        "type": "integer",
        "default": 300,
        "min": 1
    },
    "tol": {
        "type": "float",
        "default": 1e-4,
        "min": 0.0
    },
    "ablation": {
        "type": "list",
        "coerce": "str2subsets",
        "default": "all",
        "empty": False,
        "schema": {
            "type": "list",
            "empty": False,
            "schema": {"type": "string", "allowed": list(LOSS_TERMS)}
        }
    },
    "sweep_values": {
        "type": "list",
        "coerce": "str2floats",
        "default_setter": lambda doc: [0.01, 0.1, 1.0, 10.0, 100.0],
        "empty": False,
        "schema": {"type": "float", "min": 0.0}
    },
    "sweep_lambdas": {
        "type": "list",
        "coerce": "str2names",
        "default_setter": lambda doc: list(_LAMBDA_NAMES),
        "empty": False,
        "schema": {"type": "string", "allowed": _LAMBDA_NAMES}
    },
    "missing_rates": {
        "type": "list",
        "coerce": "str2floats",
        "default_setter": lambda doc: [0.3, 0.5, 0.7],
        "empty": False,
        "schema": {"type": "float", "min": 0.0, "max": 0.999999}
    },
    "view_counts": {
        # Empty means: every count from 2 to the number of views.
        "type": "list",
        "coerce": "str2ints",
        "default_setter": lambda doc: [],
        "schema": {"type": "integer", "min": 2}
    },
    "repeats": {
        # Seeds per grid cell: seed, seed + 1, ...
        "type": "integer",
        "default": 1,
        "min": 1
    }
}


SECTIONS = {"data": DATA, "model": MODEL, "train": TRAIN, "eval": EVAL}


# The coercers must be in place before the schemas get registered.
for _name, _section in SECTIONS.items():
    HsaccValidator.apply_default_coercers(_section)
    schema_registry.add(f"alephvault.hsacc.schemas.{_name}", _section)


SETTINGS = {
    "data": {
        "type": "dict",
        "default_setter": lambda doc: {},
        "schema": "alephvault.hsacc.schemas.data"
    },
    "model": {
        "type": "dict",
        "default_setter": lambda doc: {},
        "schema": "alephvault.hsacc.schemas.model"
    },
    "train": {
        "type": "dict",
        "default_setter": lambda doc: {},
        "schema": "alephvault.hsacc.schemas.train"
    },
    "eval": {
        "type": "dict",
        "default_setter": lambda doc: {},
        "schema": "alephvault.hsacc.schemas.eval"
    }
}
schema_registry.add("alephvault.hsacc.schemas.settings", SETTINGS)
