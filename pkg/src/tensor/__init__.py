"""Dense float64 tensors with reverse-mode differentiation, layers and the ADAM optimizer."""

from src.tensor.tensor import Tensor, as_tensor, no_grad

__all__ = ["Tensor", "as_tensor", "no_grad"]
