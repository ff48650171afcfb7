"""Causal discovery with parent scores: ordering by score-Jacobian leaf detection,
parent-score guided pruning, synthetic benchmarks and structure metrics."""

from .graph import Dag, Permutation
from .ordering import OrderingResult, ParentScoreMatrix, caps_order, sortnregress_order
from .postprocess import PostprocessConfig, postprocess
from .score import GaussianPlugin, SteinEstimator

__version__ = "0.1.0"

__all__ = [
    "Dag",
    "GaussianPlugin",
    "OrderingResult",
    "ParentScoreMatrix",
    "Permutation",
    "PostprocessConfig",
    "SteinEstimator",
    "caps_order",
    "postprocess",
    "sortnregress_order",
]
