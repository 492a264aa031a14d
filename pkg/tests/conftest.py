import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ckgru.autodiff import Tensor
from ckgru.optim import ParamSet


@pytest.fixture
def make_params():
    """ParamSet from keyword arrays, for finite-difference checks."""

    def factory(**arrays):
        params = ParamSet()
        tensors = {}
        for name, arr in arrays.items():
            tensors[name] = params.add(name, Tensor(np.asarray(arr, dtype=np.float64)))
        return params, tensors

    return factory
