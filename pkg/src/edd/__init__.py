"""Predicting the next state of a time-varying distribution.

Sample sets are embedded into a reproducing kernel Hilbert space, a linear
operator on the embeddings is learned by vector-valued ridge regression,
and applying it to the newest embedding yields a signed-weight prediction.
Herding converts predictions back into samples; PredSVM trains a linear
classifier directly on them.
"""

from .dynamics import DynamicsModel, SingularSystemError, extrapolate, fit
from .embedding import (
    SampleSet,
    WeightedEmbedding,
    combine,
    embed,
    inner,
    pseudo_expectation,
    rkhs_distance,
)
from .herding import HerdingConfig, candidate_pool, herd
from .kernels import KernelSpec, cross_mean, evaluate, gram
from .predsvm import LinearClassifier, flip_transform, train

__all__ = [
    "DynamicsModel",
    "HerdingConfig",
    "KernelSpec",
    "LinearClassifier",
    "SampleSet",
    "SingularSystemError",
    "WeightedEmbedding",
    "candidate_pool",
    "combine",
    "cross_mean",
    "embed",
    "evaluate",
    "extrapolate",
    "fit",
    "flip_transform",
    "gram",
    "herd",
    "inner",
    "pseudo_expectation",
    "rkhs_distance",
    "train",
]

__version__ = "0.1.0"
