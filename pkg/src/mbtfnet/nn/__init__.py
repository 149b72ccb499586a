from .tensor import Tensor, as_tensor, concat, pad, flip, no_grad
from . import functional
from .layers import (
    Module,
    Parameter,
    Linear,
    Conv2d,
    ConvTranspose2d,
    BatchNorm2d,
    PReLU,
    GRULayer,
)
from .optim import Adam
from .serialize import WeightsContainer, save_weights, load_weights
from .gradcheck import numeric_gradient, max_relative_error, check_gradients

__all__ = [
    "Tensor",
    "as_tensor",
    "concat",
    "pad",
    "flip",
    "no_grad",
    "functional",
    "Module",
    "Parameter",
    "Linear",
    "Conv2d",
    "ConvTranspose2d",
    "BatchNorm2d",
    "PReLU",
    "GRULayer",
    "Adam",
    "WeightsContainer",
    "save_weights",
    "load_weights",
    "numeric_gradient",
    "max_relative_error",
    "check_gradients",
]
