# src/model/architecture.py
import copy
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch
import torch.nn as nn

from src.utils.exceptions import ConfigError, ModelShapeError

ACTIVATIONS = ("tanh", "sigmoid", "relu", "softmax", "identity")
LAYER_KINDS = ("dense", "gru")


@dataclass
class LayerSpec:
    kind: str
    input_dim: int
    output_dim: int
    activation: str = "identity"
    head: bool = False


def validate_layers(specs: Sequence[LayerSpec]):
    """Check a layer table: trunk layers chain, every head reads the trunk output.

    Raises:
        ModelShapeError: dimensions do not chain, or softmax is used inside the trunk.
        ConfigError: unknown kind or activation.
    """
    if not specs:
        raise ModelShapeError("model has no layers")
    trunk = [s for s in specs if not s.head]
    heads = [s for s in specs if s.head]
    if any(s.head for s in specs[:len(trunk)]) or any(not s.head for s in specs[len(trunk):]):
        raise ModelShapeError("heads must follow the trunk layers")
    for s in specs:
        if s.kind not in LAYER_KINDS:
            raise ConfigError(f"unknown layer kind '{s.kind}'")
        if s.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation '{s.activation}'")
        if s.input_dim <= 0 or s.output_dim <= 0:
            raise ModelShapeError(f"layer dims must be positive, got {s.input_dim}->{s.output_dim}")
        if s.kind == "gru" and s.activation != "tanh":
            raise ConfigError("gru layers use tanh candidate activation")
    for prev, nxt in zip(trunk, trunk[1:]):
        if prev.output_dim != nxt.input_dim:
            raise ModelShapeError(f"layer output {prev.output_dim} does not feed input {nxt.input_dim}")
    trunk_out = trunk[-1].output_dim if trunk else specs[0].input_dim
    for h in heads:
        if h.input_dim != trunk_out:
            raise ModelShapeError(f"head input {h.input_dim} does not match trunk output {trunk_out}")
        if h.kind != "dense":
            raise ModelShapeError("heads must be dense layers")
    softmax_layers = [i for i, s in enumerate(specs) if s.activation == "softmax"]
    last_trunk = len(trunk) - 1
    for i in softmax_layers:
        if not specs[i].head and not (i == last_trunk and not heads):
            raise ModelShapeError("softmax is only allowed on the final layer or a head")


def classifier_specs(input_dim: int = 160, hidden_dim: int = 96, gru_dim: int = 48,
                     n_categories: int = 152) -> List[LayerSpec]:
    return [
        LayerSpec("dense", input_dim, hidden_dim, "tanh"),
        LayerSpec("gru", hidden_dim, gru_dim, "tanh"),
        LayerSpec("dense", gru_dim, n_categories, "softmax"),
    ]


def suppressor_specs(input_dim: int = 78, hidden_dim: int = 96, gru_dim: int = 96,
                     n_bands: int = 22) -> List[LayerSpec]:
    return [
        LayerSpec("dense", input_dim, hidden_dim, "tanh"),
        LayerSpec("gru", hidden_dim, gru_dim, "tanh"),
        LayerSpec("dense", gru_dim, n_bands, "sigmoid", head=True),
        LayerSpec("dense", gru_dim, 1, "sigmoid", head=True),
    ]


def _activate(x: torch.Tensor, activation: str) -> torch.Tensor:
    if activation == "tanh":
        return torch.tanh(x)
    if activation == "sigmoid":
        return torch.sigmoid(x)
    if activation == "relu":
        return torch.relu(x)
    if activation == "softmax":
        return torch.softmax(x, dim=-1)
    return x


class EchoNet(nn.Module):
    """Dense + GRU trunk with optional parallel dense heads.

    Input is (batch, time, input_dim). `forward` returns a dict with the
    activated outputs (heads concatenated), the pre-activation logits in the
    same layout, and the new hidden state (one tensor per GRU layer).
    """

    def __init__(self, specs: Sequence[LayerSpec], seed: int = 0):
        super().__init__()
        validate_layers(specs)
        self.specs = list(specs)
        self.layers = nn.ModuleList()
        for s in self.specs:
            if s.kind == "dense":
                self.layers.append(nn.Linear(s.input_dim, s.output_dim))
            else:
                self.layers.append(nn.GRU(s.input_dim, s.output_dim, batch_first=True))
        self.init_weights(seed)

    def init_weights(self, seed: int = 0):
        """Glorot-uniform weights (per gate block for GRUs), zero biases."""
        generator = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for s, layer in zip(self.specs, self.layers):
                for name, param in layer.named_parameters():
                    if name.startswith("bias"):
                        param.zero_()
                        continue
                    rows = param.shape[0] // 3 if s.kind == "gru" else param.shape[0]
                    bound = float(np.sqrt(6.0 / (param.shape[1] + rows)))
                    param.copy_(torch.empty(param.shape).uniform_(-bound, bound, generator=generator))

    @property
    def gru_dims(self) -> List[int]:
        return [s.output_dim for s in self.specs if s.kind == "gru"]

    def init_hidden(self, batch_size: int = 1) -> List[torch.Tensor]:
        dtype = next(self.parameters()).dtype
        return [torch.zeros(1, batch_size, d, dtype=dtype) for d in self.gru_dims]

    def forward(self, x: torch.Tensor, hidden: Optional[List[torch.Tensor]] = None) -> Dict[str, object]:
        if x.shape[-1] != self.specs[0].input_dim:
            raise ModelShapeError(f"input dim {x.shape[-1]} does not match model input {self.specs[0].input_dim}")
        if hidden is None:
            hidden = self.init_hidden(x.shape[0])
        new_hidden = []
        gru_index = 0
        h = x
        trunk_logits = None
        head_outputs, head_logits = [], []
        for s, layer in zip(self.specs, self.layers):
            if s.head:
                z = layer(h)
                head_logits.append(z)
                head_outputs.append(_activate(z, s.activation))
                continue
            if s.kind == "dense":
                z = layer(h)
            else:
                z, hn = layer(h, hidden[gru_index])
                new_hidden.append(hn)
                gru_index += 1
            trunk_logits = z
            h = _activate(z, s.activation)
        if head_outputs:
            return {"output": torch.cat(head_outputs, dim=-1),
                    "logits": torch.cat(head_logits, dim=-1),
                    "hidden": new_hidden}
        return {"output": h, "logits": trunk_logits, "hidden": new_hidden}


def _identity(v: np.ndarray) -> np.ndarray:
    return np.asarray(v, dtype=np.float64)


def log1p_max_normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return np.log1p(v / (np.max(v) + 1e-12))


PREPROCESSING = {
    "identity": _identity,
    "log1p-max-normalize": log1p_max_normalize,
}


class NeuralModel:
    """A network plus the metadata stored in its model file.

    Loaded models are used read-only; each stream keeps its own recurrent
    state from `new_state()` and passes it to `step`.

    Args:
        specs: layer table (trunk first, then heads)
        preprocessing: tag naming the input transform applied before `step`
        fft_size: transform size the model's features were computed with
        seed: weight-initialisation seed
    """

    def __init__(self, specs: Sequence[LayerSpec], preprocessing: str = "identity",
                 fft_size: int = 320, seed: int = 0):
        if preprocessing not in PREPROCESSING:
            raise ConfigError(f"unknown preprocessing tag '{preprocessing}'")
        self.net = EchoNet(specs, seed=seed)
        self.preprocessing = preprocessing
        self.fft_size = fft_size

    @property
    def specs(self) -> List[LayerSpec]:
        return self.net.specs

    @property
    def input_dim(self) -> int:
        return self.specs[0].input_dim

    @property
    def output_dim(self) -> int:
        heads = [s for s in self.specs if s.head]
        if heads:
            return sum(s.output_dim for s in heads)
        return self.specs[-1].output_dim

    def preprocess(self, v: np.ndarray) -> np.ndarray:
        return PREPROCESSING[self.preprocessing](v)

    def new_state(self) -> List[torch.Tensor]:
        return self.net.init_hidden(1)

    def step(self, x: np.ndarray, state: List[torch.Tensor]) -> np.ndarray:
        """One frame of streaming inference; `state` is updated in place."""
        x = np.asarray(x)
        if x.shape != (self.input_dim,):
            raise ModelShapeError(f"input has shape {x.shape}, model expects ({self.input_dim},)")
        self.net.eval()
        with torch.no_grad():
            result = self.net(torch.as_tensor(x, dtype=torch.float32).view(1, 1, -1), state)
        state[:] = result["hidden"]
        return result["output"].view(-1).numpy().astype(np.float64)

    def copy(self) -> "NeuralModel":
        return copy.deepcopy(self)


def forward(model: NeuralModel, x: np.ndarray, state: List[torch.Tensor]) -> np.ndarray:
    return model.step(x, state)


def parameter_count(model) -> int:
    net = model.net if isinstance(model, NeuralModel) else model
    return int(sum(p.numel() for p in net.parameters()))


def require_dims(model: NeuralModel, input_dim: int, output_dim: int, role: str):
    """Raise ModelShapeError unless the model has the interface a pipeline slot expects."""
    if model.input_dim != input_dim:
        raise ModelShapeError(f"{role} model takes {model.input_dim} inputs, expected {input_dim}")
    if model.output_dim != output_dim:
        raise ModelShapeError(f"{role} model has {model.output_dim} outputs, expected {output_dim}")
