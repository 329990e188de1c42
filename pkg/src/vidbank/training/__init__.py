from .checkpoint import (
    load_checkpoint,
    load_model_params,
    model_param_arrays,
    save_checkpoint,
)
from .fusion import fuse_two_stream
from .pretrain import PretrainResult, pretrain

__all__ = [
    "save_checkpoint",
    "load_checkpoint",
    "load_model_params",
    "model_param_arrays",
    "fuse_two_stream",
    "pretrain",
    "PretrainResult",
]
