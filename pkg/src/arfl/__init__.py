"""Adversarially robust feature learning on small dense networks."""

from arfl.autodiff import Tensor, backward, finite_diff_grad
from arfl.model import MlpModel, ForwardResult, init_mlp, forward, predict

__all__ = [
    "Tensor",
    "backward",
    "finite_diff_grad",
    "MlpModel",
    "ForwardResult",
    "init_mlp",
    "forward",
    "predict",
]
