from .encoder import BlockEncoder
from .convgru import ConvGRUCell, aggregate_sequence
from .memory import (
    FuturePredictor,
    MemoryBank,
    address,
    bidirectional_predict,
    critic,
    expect_future,
    predict_sequence,
)
from .network import PredictiveVideoModel, build_model

__all__ = [
    "BlockEncoder",
    "ConvGRUCell",
    "aggregate_sequence",
    "MemoryBank",
    "FuturePredictor",
    "address",
    "expect_future",
    "critic",
    "predict_sequence",
    "bidirectional_predict",
    "PredictiveVideoModel",
    "build_model",
]
