"""
Parameter containers and the layer kinds the detector is built from.

``Module`` discovers parameters and buffers by walking its attributes, so a network is
just a tree of modules; names are dotted attribute paths (``blocks.0.1.conv.weight``).
"""

from __future__ import annotations

from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import DataFormatError, DimensionError
from src.tensor import functional as F
from src.tensor.tensor import Tensor


class LayerKind(Enum):
    """Kinds of parameterized layer."""

    LINEAR = "linear"
    BATCHNORM2D = "batchnorm2d"
    CONV2D = "conv2d"


class Parameter(Tensor):
    """A leaf tensor that always requires gradients."""

    def __init__(self, data: np.ndarray, name: Optional[str] = None):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def he_normal(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / max(fan_in, 1)), size=shape)


def _nested_modules(name: str, value: object) -> Iterator[Tuple[str, "Module"]]:
    if isinstance(value, Module):
        yield name, value
    elif isinstance(value, (list, tuple)):
        for index, item in enumerate(value):
            yield from _nested_modules(f"{name}.{index}", item)


class Module:
    """Base class: parameter discovery, train/eval mode, state dicts."""

    _buffer_names: Tuple[str, ...] = ()

    def __init__(self) -> None:
        self.training = True

    def forward(self, *args, **kwargs):  # pragma: no cover - overridden
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def _children(self) -> Iterator[Tuple[str, "Module"]]:
        for attr, value in vars(self).items():
            yield from _nested_modules(attr, value)

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, child in self._children():
            yield from child.modules()

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            if isinstance(value, Parameter):
                yield f"{prefix}{attr}", value
        for name, child in self._children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for attr in self._buffer_names:
            yield f"{prefix}{attr}", getattr(self, attr)
        for name, child in self._children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def parameters(self) -> List[Parameter]:
        return [param for _, param in self.named_parameters()]

    def num_parameters(self) -> int:
        return int(sum(param.size for param in self.parameters()))

    def train(self, mode: bool = True) -> "Module":
        for module in self.modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {name: param.data.copy() for name, param in self.named_parameters()}
        state.update({name: buffer.copy() for name, buffer in self.named_buffers()})
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> None:
        """Copy values in place; shapes must match, and with ``strict`` the key sets too."""
        targets: Dict[str, np.ndarray] = {name: param.data for name, param in self.named_parameters()}
        targets.update(dict(self.named_buffers()))
        if strict:
            missing = sorted(set(targets) - set(state))
            unexpected = sorted(set(state) - set(targets))
            if missing or unexpected:
                raise DataFormatError(f"state mismatch: missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, target in targets.items():
            if name not in state:
                continue
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != target.shape:
                raise DimensionError(f"'{name}': checkpoint shape {value.shape} != model shape {target.shape}")
            target[...] = value


class Linear(Module):
    """y = x W^T + b over the last axis; W is (f_out, f_in)."""

    kind = LayerKind.LINEAR

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(he_normal(rng, (out_features, in_features), in_features))
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            raise DimensionError(f"Linear expects {self.in_features} input features, got {x.shape[-1]}")
        out = x @ self.weight.T
        return out + self.bias if self.bias is not None else out


class Conv2d(Module):
    """Square-kernel convolution; weight is (f_out, f_in, k, k)."""

    kind = LayerKind.CONV2D

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int = 0,
        bias: bool = True,
    ):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Parameter(he_normal(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in))
        self.bias = Parameter(np.zeros(out_channels)) if bias else None

    def output_extent(self, size: int) -> int:
        return F.conv_output_extent(size, self.kernel_size, self.stride, self.padding)

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class BatchNorm2d(Module):
    """Per-channel batch normalization with running statistics (momentum 0.1, eps 1e-5)."""

    kind = LayerKind.BATCHNORM2D
    _buffer_names = ("running_mean", "running_var")

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.weight = Parameter(np.ones(channels))
        self.bias = Parameter(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def forward(self, x: Tensor) -> Tensor:
        return F.batch_norm2d(
            x,
            self.weight,
            self.bias,
            self.running_mean,
            self.running_var,
            training=self.training,
            momentum=self.momentum,
            eps=self.eps,
        )


def mlp_forward(x: Tensor, layers: Sequence[Linear], activate_last: bool = True) -> Tensor:
    """
    Apply a chain of Linear layers row-wise with ReLU between them.

    Raises:
        DimensionError: naming the first layer whose input width does not match
    """
    for index, layer in enumerate(layers):
        if x.shape[-1] != layer.in_features:
            raise DimensionError(
                f"expected {layer.in_features} input features, got {x.shape[-1]}", layer_index=index
            )
        x = layer(x)
        if index < len(layers) - 1 or activate_last:
            x = F.relu(x)
    return x


class MLP(Module):
    """Point-wise multi-layer perceptron, e.g. sizes (64, 128, 128) from a d_in input."""

    def __init__(self, in_features: int, sizes: Sequence[int], rng: np.random.Generator, activate_last: bool = True):
        super().__init__()
        widths = [in_features, *sizes]
        self.layers = [Linear(widths[i], widths[i + 1], rng) for i in range(len(sizes))]
        self.activate_last = activate_last

    @property
    def out_features(self) -> int:
        return self.layers[-1].out_features

    def forward(self, x: Tensor) -> Tensor:
        return mlp_forward(x, self.layers, self.activate_last)


def conv2d_bn_relu(x: Tensor, conv: Conv2d, bn: Optional[BatchNorm2d] = None) -> Tensor:
    """
    Conv2D -> BatchNorm -> ReLU. Accepts C x H x W (single map) or B x C x H x W.
    """
    single = x.ndim == 3
    if single:
        x = x.reshape((1,) + x.shape)
    out = conv(x)
    if bn is not None:
        out = bn(out)
    out = F.relu(out)
    return out.reshape(out.shape[1:]) if single else out


class ConvBnRelu(Module):
    """Conv2d(k, s, p) followed by BatchNorm2d and ReLU."""

    def __init__(
        self, in_channels: int, out_channels: int, rng: np.random.Generator, kernel_size: int = 3, stride: int = 1
    ):
        super().__init__()
        self.conv = Conv2d(in_channels, out_channels, kernel_size, rng, stride=stride, padding=kernel_size // 2)
        self.bn = BatchNorm2d(out_channels)

    @property
    def out_channels(self) -> int:
        return self.conv.out_channels

    def forward(self, x: Tensor) -> Tensor:
        return conv2d_bn_relu(x, self.conv, self.bn)
