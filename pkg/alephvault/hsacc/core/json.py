import json
import typing as t
import numpy as np
import torch


class ArrayEnhancedEncoder(json.JSONEncoder):
    """
    This is an enhancement over the standard JSONEncoder, adding the
    encoding of numpy scalars / arrays and torch tensors (as numbers or
    lists).
    """

    def default(self, o: t.Any) -> t.Any:
        if isinstance(o, np.integer):
            return int(o)
        elif isinstance(o, np.floating):
            return float(o)
        elif isinstance(o, np.bool_):
            return bool(o)
        elif isinstance(o, np.ndarray):
            return o.tolist()
        elif isinstance(o, torch.Tensor):
            return o.detach().cpu().tolist()
        return super().default(o)


def dumps(content: t.Any) -> str:
    return json.dumps(content, cls=ArrayEnhancedEncoder, indent=2, sort_keys=True)
