import math
import logging
from typing import List, Sequence, Tuple
import torch
from torch import nn


_logger = logging.getLogger(__name__ + ":logger")


ACTIVATIONS = {
    "relu": nn.ReLU,
    "tanh": nn.Tanh,
    "sigmoid": nn.Sigmoid,
    "leaky_relu": nn.LeakyReLU,
}


class Mlp(nn.Module):
    """
    A feed-forward network: fully connected layers chained by dimension,
    the chosen nonlinearity after every hidden layer, and a linear output.
    This is used for the encoders, the decoders and the cross-view
    inference heads.
    """

    output_activation: str = "linear"

    def __init__(self, layer_dims: Sequence[int], activation: str = "relu"):
        if len(layer_dims) < 2 or any(int(dim) < 1 for dim in layer_dims):
            raise ValueError(f"Invalid layer dims: {list(layer_dims)}")
        if activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation: {activation}")
        super().__init__()
        self.layer_dims = [int(dim) for dim in layer_dims]
        self.activation = activation
        self.layers = nn.ModuleList(nn.Linear(fan_in, fan_out)
                                    for fan_in, fan_out in zip(self.layer_dims[:-1], self.layer_dims[1:]))
        self._nonlinearity = ACTIVATIONS[activation]()

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        last = len(self.layers) - 1
        for index, layer in enumerate(self.layers):
            x = layer(x)
            if index < last:
                x = self._nonlinearity(x)
        return x

    def layer_params(self) -> List[Tuple[torch.Tensor, torch.Tensor]]:
        """
        The parameters as (in_dim x out_dim weight, out_dim bias) pairs,
        in layer order.
        """

        return [(layer.weight.t(), layer.bias) for layer in self.layers]


def init_mlp(layer_dims: Sequence[int], seed: int, activation: str = "relu",
             dtype: torch.dtype = torch.float32) -> Mlp:
    """
    Creates a network with fan-in scaled uniform weights, in the range
    +/- sqrt(6 / fan_in), and zero biases.
    :param layer_dims: The dimensions, input first and output last.
    :param seed: The seed of the weights.
    :param activation: The hidden-layer nonlinearity.
    :param dtype: The parameters' dtype.
    :return: The network.
    """

    generator = torch.Generator().manual_seed(int(seed))
    mlp = Mlp(layer_dims, activation).to(dtype)
    with torch.no_grad():
        for layer in mlp.layers:
            bound = math.sqrt(6.0 / layer.in_features)
            layer.weight.uniform_(-bound, bound, generator=generator)
            layer.bias.zero_()
    return mlp


def forward(params: Mlp, batch: torch.Tensor) -> torch.Tensor:
    """
    Evaluates a network over a batch (one sample per row).
    """

    if batch.dim() != 2 or batch.shape[1] != params.in_dim:
        raise ValueError(f"dimension mismatch: the network expects {params.in_dim} columns, "
                         f"got a batch of shape {tuple(batch.shape)}")
    return params(batch)


def gradients(loss: torch.Tensor, parameters: Sequence[torch.Tensor]) -> List[torch.Tensor]:
    """
    Computes the exact (reverse-mode) gradient of a scalar loss with
    respect to each parameter. Parameters the loss does not depend on get
    a zero gradient.
    :param loss: The scalar loss.
    :param parameters: The parameters.
    :return: One gradient per parameter, same shapes.
    """

    if not bool(torch.isfinite(loss).all()):
        raise ValueError(f"non-finite loss: {loss.item()}")
    parameters = list(parameters)
    grads = torch.autograd.grad(loss, parameters, allow_unused=True)
    return [torch.zeros_like(parameter) if grad is None else grad for parameter, grad in zip(parameters, grads)]


class OptimizerState:
    """
    The Adam state of a list of parameters: its first and second moment
    accumulators (kept by a torch Adam optimizer bound to exactly those
    parameters, with beta1=0.9, beta2=0.999 and eps=1e-8) and the count of
    steps performed so far.
    """

    betas = (0.9, 0.999)
    eps = 1e-8

    def __init__(self, parameters: Sequence[torch.Tensor], lr: float):
        self.parameters = list(parameters)
        self.optimizer = torch.optim.Adam(self.parameters, lr=lr, betas=self.betas, eps=self.eps)
        self.step = 0

    def moments(self, parameter: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        The first and second moments of one of the parameters (zeros before
        the first step).
        """

        state = self.optimizer.state.get(parameter)
        if not state:
            return torch.zeros_like(parameter), torch.zeros_like(parameter)
        return state["exp_avg"], state["exp_avg_sq"]


def make_optimizer(parameters: Sequence[torch.Tensor], lr: float) -> OptimizerState:
    return OptimizerState(parameters, lr)


def adam_step(params: Sequence[torch.Tensor], grads: Sequence[torch.Tensor], state: OptimizerState,
              lr: float, max_norm: float = 0.0) -> Tuple[List[torch.Tensor], OptimizerState]:
    """
    Performs one bias-corrected Adam update, in place, of the parameters.
    :param params: The parameters (the same the state was created for).
    :param grads: Their gradients.
    :param state: The optimizer state.
    :param lr: The learning rate of this step.
    :param max_norm: If positive, the gradients are first rescaled so that
      their global norm does not exceed this value.
    :return: The (updated) parameters and state.
    """

    params = list(params)
    grads = list(grads)
    if [id(param) for param in params] != [id(param) for param in state.parameters]:
        raise ValueError("The parameters do not match the optimizer state")
    if len(grads) != len(params):
        raise ValueError(f"shape mismatch: {len(params)} parameters, {len(grads)} gradients")
    for param, grad in zip(params, grads):
        if param.shape != grad.shape:
            raise ValueError(f"shape mismatch: parameter {tuple(param.shape)}, gradient {tuple(grad.shape)}")
        param.grad = grad.detach().to(param.dtype)
    if max_norm > 0:
        norm = nn.utils.clip_grad_norm_(params, max_norm)
        _logger.debug(f"Gradient norm before clipping: {float(norm):.6g}")
    for group in state.optimizer.param_groups:
        group["lr"] = lr
    state.optimizer.step()
    state.optimizer.zero_grad(set_to_none=True)
    state.step += 1
    return params, state


def pair_key(source: int, target: int) -> str:
    return f"{source}_{target}"


class HsaccModel(nn.Module):
    """
    The trainable part of the method: one autoencoder per view (the decoder
    mirrors the encoder) and one cross-view inference head per ordered pair
    of views, mapping the source latent to the target latent.
    """

    def __init__(self, dims: Sequence[int], latent_dim: int = 128,
                 encoder_dims: Sequence[int] = (1024, 1024, 1024),
                 inference_dims: Sequence[int] = (256, 128, 256),
                 activation: str = "relu", seed: int = 0, dtype: torch.dtype = torch.float32):
        if len(dims) < 2:
            raise ValueError(f"At least 2 views are needed, got {len(dims)}")
        super().__init__()
        self.dims = [int(dim) for dim in dims]
        self.latent_dim = int(latent_dim)
        self.encoder_dims = [int(dim) for dim in encoder_dims]
        self.inference_dims = [int(dim) for dim in inference_dims]
        self.activation = activation

        # Every network gets its own seed, so adding views keeps the
        # initialization of the first ones.
        v = len(self.dims)
        self.encoders = nn.ModuleList(
            init_mlp([dim, *self.encoder_dims, self.latent_dim], seed + index, activation, dtype)
            for index, dim in enumerate(self.dims)
        )
        self.decoders = nn.ModuleList(
            init_mlp([self.latent_dim, *reversed(self.encoder_dims), dim], seed + 100 + index, activation, dtype)
            for index, dim in enumerate(self.dims)
        )
        self.heads = nn.ModuleDict({
            pair_key(source, target): init_mlp([self.latent_dim, *self.inference_dims, self.latent_dim],
                                               seed + 200 + source * v + target, activation, dtype)
            for source, target in self.pairs()
        })

    @property
    def v(self) -> int:
        return len(self.dims)

    def pairs(self) -> List[Tuple[int, int]]:
        """
        The ordered pairs (source, target) of distinct views.
        """

        return [(source, target) for source in range(len(self.dims)) for target in range(len(self.dims))
                if source != target]

    def head(self, source: int, target: int) -> Mlp:
        return self.heads[pair_key(source, target)]

    def encode(self, views: Sequence[torch.Tensor]) -> List[torch.Tensor]:
        return [forward(encoder, view) for encoder, view in zip(self.encoders, views)]

    def reconstruct(self, latents: Sequence[torch.Tensor]) -> List[torch.Tensor]:
        return [forward(decoder, latent) for decoder, latent in zip(self.decoders, latents)]

    def infer(self, source: int, target: int, z_source: torch.Tensor) -> torch.Tensor:
        return forward(self.head(source, target), z_source)

    def architecture(self) -> dict:
        return {
            "dims": self.dims, "latent_dim": self.latent_dim, "encoder_dims": self.encoder_dims,
            "inference_dims": self.inference_dims, "activation": self.activation
        }

    def networks(self) -> List[Tuple[str, Mlp]]:
        result = [(f"encoder_{index}", encoder) for index, encoder in enumerate(self.encoders)]
        result += [(f"decoder_{index}", decoder) for index, decoder in enumerate(self.decoders)]
        result += [(f"head_{key}", head) for key, head in self.heads.items()]
        return result


def save_checkpoint(model: HsaccModel, path: str, extra: dict = None):
    """
    Writes the model to a single file: the architecture, and per network,
    its layer dims, activation tag and (in_dim x out_dim, row-major)
    weights and biases.
    :param model: The model.
    :param path: The file path.
    :param extra: Additional plain metadata to store (e.g. the epoch).
    """

    payload = {
        "architecture": model.architecture(),
        "networks": {
            name: {
                "layer_dims": mlp.layer_dims,
                "activation": mlp.activation,
                "weights": [weight.detach().contiguous().clone() for weight, _ in mlp.layer_params()],
                "biases": [bias.detach().clone() for _, bias in mlp.layer_params()],
            } for name, mlp in model.networks()
        },
        "extra": extra or {}
    }
    torch.save(payload, path)


def load_checkpoint(path: str) -> Tuple[HsaccModel, dict]:
    """
    Reads a model written by `save_checkpoint`.
    :param path: The file path.
    :return: The model and the extra metadata.
    """

    payload = torch.load(path, map_location="cpu", weights_only=True)
    architecture = payload["architecture"]
    first = payload["networks"]["encoder_0"]["weights"][0]
    model = HsaccModel(**architecture, dtype=first.dtype)
    with torch.no_grad():
        for name, mlp in model.networks():
            stored = payload["networks"][name]
            if stored["layer_dims"] != mlp.layer_dims or stored["activation"] != mlp.activation:
                raise ValueError(f"Checkpoint network {name} does not match its architecture")
            for layer, weight, bias in zip(mlp.layers, stored["weights"], stored["biases"]):
                layer.weight.copy_(weight.t())
                layer.bias.copy_(bias)
    _logger.info(f"Loaded checkpoint {path}")
    return model, payload.get("extra", {})
