"""Recurrent sequence classifiers trained with backpropagation through time."""

from .checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from .losses import cross_entropy
from .models import (
    ARCHS,
    BRNNClassifier,
    LSTMClassifier,
    RNNClassifier,
    SequenceClassifier,
    build_model,
)
from .optim import AdamW, clip_grad_norm, global_norm
from .tensor import check_finite, softmax

__all__ = [
    "ARCHS",
    "AdamW",
    "BRNNClassifier",
    "LSTMClassifier",
    "RNNClassifier",
    "SequenceClassifier",
    "build_model",
    "check_finite",
    "clip_grad_norm",
    "cross_entropy",
    "decode_checkpoint",
    "encode_checkpoint",
    "global_norm",
    "load_checkpoint",
    "save_checkpoint",
    "softmax",
]
