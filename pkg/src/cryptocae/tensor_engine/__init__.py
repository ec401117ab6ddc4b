"""Dense float64 numerical core: 1-D conv stack layers, reverse-mode gradients, Nadam."""

from .layers import (BatchNorm1D, Conv1D, Dense, Flatten, Layer, MaxPool1D, ReLU, Reshape,
                     Sequential, Upsample1D, layer_from_dict)
from .ops import (batchnorm1d, batchnorm1d_backward, conv1d, conv1d_backward, dense,
                  dense_backward, maxpool1d, maxpool1d_backward, mse_loss, relu, relu_backward,
                  upsample1d, upsample1d_backward)
from .optim import NadamState, nadam_step
from .io import load_parameters, save_parameters
from .gradcheck import numerical_gradient, relative_error

__all__ = [
    "BatchNorm1D", "Conv1D", "Dense", "Flatten", "Layer", "MaxPool1D", "ReLU", "Reshape",
    "Sequential", "Upsample1D", "layer_from_dict",
    "batchnorm1d", "batchnorm1d_backward", "conv1d", "conv1d_backward", "dense",
    "dense_backward", "maxpool1d", "maxpool1d_backward", "mse_loss", "relu", "relu_backward",
    "upsample1d", "upsample1d_backward",
    "NadamState", "nadam_step", "load_parameters", "save_parameters",
    "numerical_gradient", "relative_error",
]
