"""Learned MT evaluation: estimator and triplet-ranking heads over a toy encoder."""

from .data import DARRPair, DASegment, EvalTuple, PostEditTuple, RankQuadruple
from .estimator import Estimator, EstimatorConfig
from .ranker import Ranker, RankerConfig

__version__ = "0.1.0"

__all__ = [
    "DARRPair", "DASegment", "EvalTuple", "Estimator", "EstimatorConfig",
    "PostEditTuple", "RankQuadruple", "Ranker", "RankerConfig",
]
