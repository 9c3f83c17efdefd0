"""Dense float64 tensors, feedforward networks, gradients and Adam.

Tensors are plain ``torch.Tensor`` objects in float64. Recording for
reverse-mode differentiation only happens inside an open :class:`Tape`;
outside one, network evaluations run without building a graph.
"""

import contextvars
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from pydantic import BaseModel, model_validator
from torch import nn

from src.core.errors import NonFiniteError, ValidationError

logger = logging.getLogger(__name__)

DTYPE = torch.float64

ArrayLike = Union[torch.Tensor, np.ndarray, Sequence[float], float]


def as_tensor(value: ArrayLike) -> torch.Tensor:
    """Convert to a float64 tensor without copying when possible"""
    if isinstance(value, torch.Tensor):
        return value if value.dtype == DTYPE else value.to(DTYPE)
    return torch.as_tensor(np.asarray(value, dtype=np.float64), dtype=DTYPE)


def check_finite(value: torch.Tensor, what: str) -> torch.Tensor:
    if not bool(torch.isfinite(value).all()):
        logger.error(f"Non-finite values in {what}")
        raise NonFiniteError(f"non-finite values in {what}")
    return value


# ---------------------------------------------------------------------------
# Tape
# ---------------------------------------------------------------------------

_active_tape: contextvars.ContextVar[Optional["Tape"]] = contextvars.ContextVar(
    "active_tape", default=None
)


class Tape:
    """Records operations for one reverse pass.

    Usage::

        with Tape(model.named_parameters()) as tape:
            loss = tape.record(mse_loss(model(x), y))
        grads = grad(tape)

    The graph itself is torch's autograd graph; the tape owns the set of
    watched parameters, the scalar root, and decides whether network
    evaluations record at all.
    """

    def __init__(self, params: Union[Mapping[str, torch.Tensor], Iterable[Tuple[str, torch.Tensor]], None] = None):
        self.params: Dict[str, torch.Tensor] = {}
        self.root: Optional[torch.Tensor] = None
        self._token = None
        self._grad_mode = None
        if params is not None:
            items = params.items() if isinstance(params, Mapping) else params
            for name, tensor in items:
                self.watch(name, tensor)

    def watch(self, name: str, tensor: torch.Tensor) -> torch.Tensor:
        if tensor.is_leaf and not tensor.requires_grad:
            tensor.requires_grad_(True)
        self.params[name] = tensor
        return tensor

    def record(self, loss: torch.Tensor) -> torch.Tensor:
        self.root = loss
        return loss

    def __enter__(self) -> "Tape":
        self._grad_mode = torch.enable_grad()
        self._grad_mode.__enter__()
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _active_tape.reset(self._token)
        self._grad_mode.__exit__(exc_type, exc, tb)
        return False

    @staticmethod
    def active() -> Optional["Tape"]:
        return _active_tape.get()


def is_recording() -> bool:
    return _active_tape.get() is not None


def grad(loss_tape: Tape) -> Dict[str, torch.Tensor]:
    """Gradients of the tape's scalar root with respect to every watched parameter"""
    root = loss_tape.root
    if root is None:
        raise ValidationError("tape has no recorded root")
    if root.numel() != 1:
        raise ValidationError(f"tape root must be scalar, got shape {tuple(root.shape)}")
    names = list(loss_tape.params)
    tensors = [loss_tape.params[n] for n in names]
    raw = torch.autograd.grad(root.reshape(()), tensors, allow_unused=True)
    grads = {}
    for name, tensor, g in zip(names, tensors, raw):
        g = torch.zeros_like(tensor) if g is None else g
        grads[name] = check_finite(g, f"gradient of {name}")
    return grads


# ---------------------------------------------------------------------------
# Feedforward networks
# ---------------------------------------------------------------------------

class Activation(str, Enum):
    TANH = "tanh"
    RELU = "relu"
    IDENTITY = "identity"

    def apply(self, x: torch.Tensor) -> torch.Tensor:
        if self is Activation.TANH:
            return torch.tanh(x)
        if self is Activation.RELU:
            return torch.relu(x)
        return x


class Mlp(nn.Module):
    """Layered weight/bias bundle with one activation between layers.

    ``sizes`` lists every layer width including input and output, so
    ``FC(100)_2`` from D to D is ``[D, 100, 100, D]``.
    """

    def __init__(
        self,
        sizes: Sequence[int],
        activation: Union[Activation, str] = Activation.TANH,
        final_activation: Union[Activation, str] = Activation.IDENTITY,
    ):
        super().__init__()
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise ValidationError(f"invalid layer sizes {list(sizes)}")
        self.sizes = [int(s) for s in sizes]
        self.activation = Activation(activation)
        self.final_activation = Activation(final_activation)
        self.layers = nn.ModuleList(
            nn.Linear(n_in, n_out, dtype=DTYPE) for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:])
        )

    @property
    def in_features(self) -> int:
        return self.sizes[0]

    @property
    def out_features(self) -> int:
        return self.sizes[-1]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return mlp_forward(self, x)


def fc(n_in: int, n_out: int, width: int, depth: int, activation: Union[Activation, str] = Activation.TANH,
       final_activation: Union[Activation, str] = Activation.IDENTITY) -> Mlp:
    """``FC(width)_depth``: ``depth`` hidden layers of ``width`` neurons"""
    return Mlp([n_in] + [width] * depth + [n_out], activation, final_activation)


def mlp_forward(params: Mlp, x: torch.Tensor) -> torch.Tensor:
    x = as_tensor(x)
    if x.shape[-1:] != (params.in_features,):
        raise ValidationError(
            f"input last dimension {tuple(x.shape[-1:])} does not match layer input {params.in_features}"
        )
    with torch.set_grad_enabled(is_recording()):
        h = x
        last = len(params.layers) - 1
        for k, layer in enumerate(params.layers):
            h = torch.nn.functional.linear(h, layer.weight, layer.bias)
            h = params.activation.apply(h) if k < last else params.final_activation.apply(h)
    return check_finite(h, "network output")


def build_mlp(sizes: Sequence[int], activation: Union[Activation, str] = Activation.TANH,
              final_activation: Union[Activation, str] = Activation.IDENTITY, seed: Optional[int] = None) -> Mlp:
    """Seeded construction; fan-in uniform initialization from ``nn.Linear``"""
    if seed is None:
        return Mlp(sizes, activation, final_activation)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return Mlp(sizes, activation, final_activation)


def zero_(module: nn.Module) -> nn.Module:
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def mse_loss(pred: torch.Tensor, target: torch.Tensor, weights: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Mean over every element of the squared difference.

    ``weights`` (same shape, typically an observation mask) restricts the
    mean to the weighted elements.
    """
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ValidationError(f"shape mismatch {tuple(pred.shape)} vs {tuple(target.shape)}")
    sq = (pred - target) ** 2
    if weights is None:
        loss = sq.mean()
    else:
        w = as_tensor(weights)
        if w.shape != sq.shape:
            raise ValidationError(f"weight shape {tuple(w.shape)} does not match {tuple(sq.shape)}")
        total = w.sum()
        if float(total) <= 0:
            raise ValidationError("mse over an empty selection")
        loss = (sq * w).sum() / total
    return check_finite(loss, "mse loss")


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Adam accumulators bound to one parameter set.

    Moments live in ``optimizer.state`` and start at zero on the first step.
    """
    optimizer: torch.optim.Adam
    lr: float = 1e-3
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    names: List[str] = field(default_factory=list)

    @property
    def step_count(self) -> int:
        steps = [int(s["step"]) for s in self.optimizer.state.values() if "step" in s]
        return max(steps, default=0)

    def moments(self, name: str) -> Tuple[torch.Tensor, torch.Tensor]:
        param = self.optimizer.param_groups[0]["params"][self.names.index(name)]
        state = self.optimizer.state.get(param, {})
        zeros = torch.zeros_like(param)
        return state.get("exp_avg", zeros), state.get("exp_avg_sq", zeros)


def make_adam(params: Union[Mapping[str, torch.Tensor], Iterable[Tuple[str, torch.Tensor]]], lr: float = 1e-3,
              betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> AdamState:
    items = list(params.items() if isinstance(params, Mapping) else params)
    optimizer = torch.optim.Adam([p for _, p in items], lr=lr, betas=betas, eps=eps)
    return AdamState(optimizer=optimizer, lr=lr, betas=betas, eps=eps, names=[n for n, _ in items])


def adam_step(params: Mapping[str, torch.Tensor], grads: Mapping[str, torch.Tensor],
              state: AdamState) -> Tuple[Mapping[str, torch.Tensor], AdamState]:
    """One bias-corrected Adam update; parameters are updated in place"""
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            p.grad = None
            continue
        if g.shape != p.shape:
            raise ValidationError(f"gradient shape {tuple(g.shape)} does not match {name} {tuple(p.shape)}")
        p.grad = g.detach().clone()
    state.optimizer.step()
    state.optimizer.zero_grad(set_to_none=True)
    return params, state


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

class MlpCheckpoint(BaseModel):
    sizes: List[int]
    activation: Activation
    final_activation: Activation = Activation.IDENTITY
    weights: List[List[float]]
    biases: List[List[float]]

    @model_validator(mode="after")
    def _check_shapes(self):
        if len(self.weights) != len(self.sizes) - 1 or len(self.biases) != len(self.sizes) - 1:
            raise ValueError("layer count does not match sizes")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if len(w) != self.sizes[k] * self.sizes[k + 1] or len(b) != self.sizes[k + 1]:
                raise ValueError(f"layer {k} arrays do not match sizes")
        return self


def mlp_to_checkpoint(params: Mlp) -> MlpCheckpoint:
    return MlpCheckpoint(
        sizes=params.sizes,
        activation=params.activation,
        final_activation=params.final_activation,
        weights=[layer.weight.detach().reshape(-1).tolist() for layer in params.layers],
        biases=[layer.bias.detach().reshape(-1).tolist() for layer in params.layers],
    )


def mlp_from_checkpoint(checkpoint: Union[MlpCheckpoint, dict]) -> Mlp:
    ckpt = MlpCheckpoint.model_validate(checkpoint)
    params = Mlp(ckpt.sizes, ckpt.activation, ckpt.final_activation)
    with torch.no_grad():
        for layer, w, b in zip(params.layers, ckpt.weights, ckpt.biases):
            layer.weight.copy_(torch.tensor(w, dtype=DTYPE).reshape(layer.weight.shape))
            layer.bias.copy_(torch.tensor(b, dtype=DTYPE))
    return params
