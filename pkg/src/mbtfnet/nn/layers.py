"""Layer classes: parameter containers over the functional kernels.

All layers operate on single items (no batch axis): images are
``[channels, freq, time]``, sequences are ``[T, B, D]`` where B is an
internal vectorization axis (e.g. all time steps of a spectrogram when
running a recurrence along frequency).
"""

from __future__ import annotations

import numpy as np

from . import functional as F
from .tensor import Tensor, concat, flip

__all__ = [
    "Module",
    "Parameter",
    "Linear",
    "Conv2d",
    "ConvTranspose2d",
    "BatchNorm2d",
    "PReLU",
    "GRULayer",
]


class Parameter(Tensor):
    """A tensor registered as trainable state."""

    def __init__(self, data):
        super().__init__(np.asarray(data), requires_grad=True)


class Module:
    """Minimal module: tracks parameters, buffers, submodules by attribute."""

    def __init__(self):
        self._training = True

    # attribute walk keeps insertion order, so parameter paths are stable
    def named_parameters(self, prefix: str = "") -> dict[str, Parameter]:
        out: dict[str, Parameter] = {}
        for name, value in vars(self).items():
            if name.startswith("_") and name != "_training":
                continue
            path = f"{prefix}{name}" if not prefix else f"{prefix}.{name}"
            if isinstance(value, Parameter):
                out[path] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(path))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{path}.{i}"))
                    elif isinstance(item, Parameter):
                        out[f"{path}.{i}"] = item
        return out

    def named_buffers(self, prefix: str = "") -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name, value in vars(self).items():
            path = f"{prefix}{name}" if not prefix else f"{prefix}.{name}"
            if isinstance(value, Module):
                out.update(value.named_buffers(path))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_buffers(f"{path}.{i}"))
            elif isinstance(value, np.ndarray) and name.startswith("running_"):
                out[path] = value
        return out

    def train(self, mode: bool = True):
        self._training = mode
        for value in vars(self).values():
            if isinstance(value, Module):
                value.train(mode)
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        item.train(mode)
        return self

    def eval(self):
        return self.train(False)

    @property
    def training(self) -> bool:
        return self._training

    def parameter_count(self) -> int:
        return sum(p.size for p in self.named_parameters().values())

    def zero_grad(self):
        for p in self.named_parameters().values():
            p.grad = None

    def astype(self, dtype):
        # running-stat buffers stay float64
        for p in self.named_parameters().values():
            p.data = p.data.astype(dtype)
        return self


def _uniform(rng: np.random.Generator, shape, bound: float, dtype) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 bias: bool = True, dtype=np.float32):
        super().__init__()
        bound = 1.0 / np.sqrt(in_features)
        self.weight = Parameter(_uniform(rng, (out_features, in_features), bound, dtype))
        self.bias = Parameter(np.zeros(out_features, dtype=dtype)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        shape = x.shape
        flat = x.reshape((-1, shape[-1])) if x.ndim != 2 else x
        out = flat @ self.weight.transpose()
        if self.bias is not None:
            out = out + self.bias.reshape((1, -1))
        if x.ndim != 2:
            out = out.reshape(shape[:-1] + (self.weight.shape[0],))
        return out


def _time_padding(k_t: int, dilation_t: int, causal: bool) -> tuple[int, int]:
    total = (k_t - 1) * dilation_t
    if causal:
        return total, 0
    left = total // 2
    return left, total - left


class Conv2d(Module):
    """2-D convolution on [C, F, T]. Frequency axis is padded 'same' for its
    kernel/dilation; the time axis pads all-past when ``causal``."""

    def __init__(self, in_channels: int, out_channels: int, kernel: tuple[int, int],
                 rng: np.random.Generator, stride: tuple[int, int] = (1, 1),
                 dilation: tuple[int, int] = (1, 1), causal: bool = False,
                 bias: bool = True, dtype=np.float32):
        super().__init__()
        kf, kt = kernel
        fan_in = in_channels * kf * kt
        bound = 1.0 / np.sqrt(fan_in)
        self.weight = Parameter(_uniform(rng, (out_channels, in_channels, kf, kt), bound, dtype))
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype)) if bias else None
        self.stride = stride
        self.dilation = dilation
        total_f = (kf - 1) * dilation[0]
        self.pad_f = (total_f // 2, total_f - total_f // 2)
        self.pad_t = _time_padding(kt, dilation[1], causal)

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.dilation,
                        self.pad_f, self.pad_t)


class ConvTranspose2d(Module):
    """Transposed conv on [C, F, T]; inverts a matching :class:`Conv2d`.

    ``target_f`` pins the output frequency extent (the paired encoder input
    size); the needed output padding is derived from it.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel: tuple[int, int],
                 rng: np.random.Generator, stride: tuple[int, int] = (1, 1),
                 causal: bool = False, bias: bool = True, dtype=np.float32):
        super().__init__()
        kf, kt = kernel
        fan_in = in_channels * kf * kt
        bound = 1.0 / np.sqrt(fan_in)
        self.weight = Parameter(_uniform(rng, (in_channels, out_channels, kf, kt), bound, dtype))
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype)) if bias else None
        self.stride = stride
        self.kernel = kernel
        total_f = (kf - 1)
        self.pad_f = (total_f // 2, total_f - total_f // 2)
        # scatter output at time t collects inputs <= t, so the causal crop
        # removes the tail; the non-causal crop mirrors Conv2d's split
        total_t = (kt - 1)
        self.pad_t = (0, total_t) if causal else (total_t - total_t // 2, total_t // 2)

    def __call__(self, x: Tensor, target_f: int | None = None) -> Tensor:
        kf, kt = self.kernel
        sf, st = self.stride
        f_in, t_in = x.shape[1], x.shape[2]
        base_f = (f_in - 1) * sf + kf - self.pad_f[0] - self.pad_f[1]
        if target_f is None:
            out_pad_f = 0
        else:
            out_pad_f = target_f - base_f
            if out_pad_f < 0 or out_pad_f >= sf + 1:
                raise ValueError(
                    f"cannot reach target frequency size {target_f} from {f_in} "
                    f"(base output {base_f})"
                )
        return F.conv_transpose2d(x, self.weight, self.bias, self.stride, (1, 1),
                                  self.pad_f, self.pad_t, (out_pad_f, 0))


class BatchNorm2d(Module):
    """Per-channel normalization over (freq, time) with affine parameters.

    Training mode uses the current item's statistics and updates running
    estimates; eval mode applies the running estimates pointwise (which keeps
    causal stacks causal).
    """

    def __init__(self, channels: int, momentum: float = 0.99, eps: float = 1e-5,
                 dtype=np.float32):
        super().__init__()
        self.gamma = Parameter(np.ones(channels, dtype=dtype))
        self.beta = Parameter(np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=np.float64)
        self.running_var = np.ones(channels, dtype=np.float64)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        c = x.shape[0]
        if self.training:
            mean = x.mean(axis=(1, 2), keepdims=True)
            var = ((x - mean) ** 2.0).mean(axis=(1, 2), keepdims=True)
            self.running_mean *= self.momentum
            self.running_mean += (1.0 - self.momentum) * mean.data.reshape(c)
            self.running_var *= self.momentum
            self.running_var += (1.0 - self.momentum) * var.data.reshape(c)
            xhat = (x - mean) * (var + self.eps) ** -0.5
        else:
            mean = self.running_mean.astype(x.dtype).reshape(c, 1, 1)
            scale = (1.0 / np.sqrt(self.running_var + self.eps)).astype(x.dtype)
            xhat = (x - mean) * scale.reshape(c, 1, 1)
        return xhat * self.gamma.reshape((c, 1, 1)) + self.beta.reshape((c, 1, 1))


class PReLU(Module):
    def __init__(self, channels: int, init: float = 0.25, dtype=np.float32):
        super().__init__()
        self.slope = Parameter(np.full(channels, init, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return F.prelu(x, self.slope)


class GRULayer(Module):
    """Single GRU layer, optionally bidirectional.

    Input/output layout ``[T, B, D]``; ``B`` vectorizes independent sequences.
    Bidirectional output concatenates forward and backward features (2H).
    """

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator,
                 bidirectional: bool = False, dtype=np.float32):
        super().__init__()
        self.hidden_size = hidden_size
        self.bidirectional = bidirectional
        bound = 1.0 / np.sqrt(hidden_size)

        def make():
            return {
                "w_ih": Parameter(_uniform(rng, (3 * hidden_size, input_size), bound, dtype)),
                "w_hh": Parameter(_uniform(rng, (3 * hidden_size, hidden_size), bound, dtype)),
                "b_ih": Parameter(np.zeros(3 * hidden_size, dtype=dtype)),
                "b_hh": Parameter(np.zeros(3 * hidden_size, dtype=dtype)),
            }

        fw = make()
        self.w_ih = fw["w_ih"]
        self.w_hh = fw["w_hh"]
        self.b_ih = fw["b_ih"]
        self.b_hh = fw["b_hh"]
        if bidirectional:
            bw = make()
            self.w_ih_rev = bw["w_ih"]
            self.w_hh_rev = bw["w_hh"]
            self.b_ih_rev = bw["b_ih"]
            self.b_hh_rev = bw["b_hh"]

    def __call__(self, x: Tensor, h0: Tensor | None = None) -> tuple[Tensor, Tensor]:
        """Returns (output sequence, final hidden state of the forward pass)."""
        T, B, _ = x.shape
        if h0 is None:
            h0 = Tensor(np.zeros((B, self.hidden_size), dtype=x.dtype))
        fwd = F.gru(x, h0, self.w_ih, self.w_hh, self.b_ih, self.b_hh)
        h_last = fwd[T - 1]
        if not self.bidirectional:
            return fwd, h_last
        h0r = Tensor(np.zeros((B, self.hidden_size), dtype=x.dtype))
        rev_in = flip(x, 0)
        rev = F.gru(rev_in, h0r, self.w_ih_rev, self.w_hh_rev, self.b_ih_rev, self.b_hh_rev)
        out = concat([fwd, flip(rev, 0)], axis=2)
        return out, h_last
