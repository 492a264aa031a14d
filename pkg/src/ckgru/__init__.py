"""Tweet sentiment classification with a knowledge-gated bidirectional GRU.

The package is self-contained: its own reverse-mode autodiff core
(:mod:`ckgru.autodiff`), deterministic RNG (:mod:`ckgru.rng`), tweet
normalization (:mod:`ckgru.preprocess`), lexicon features
(:mod:`ckgru.features`, :mod:`ckgru.knowledge`), the network itself
(:mod:`ckgru.model`) and a cross-validation harness
(:mod:`ckgru.training`).  ``ckgru --help`` lists the command-line surface.
"""

from .autodiff import ShapeError, Tensor
from .backend import KERNEL
from .optim import ParamSet, adam_step
from .rng import Rng

__all__ = ["KERNEL", "ParamSet", "Rng", "ShapeError", "Tensor", "adam_step"]
__version__ = "0.1.0"
