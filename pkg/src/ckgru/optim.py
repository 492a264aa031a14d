"""Named parameter collection and the Adam update rule."""

import numpy as np

from .autodiff import ShapeError, Tensor


class ParamSet:
    """Named map of trainable tensors with per-parameter Adam state.

    Insertion order is the iteration order, so two runs that register
    parameters in the same order update them in the same order.
    """

    def __init__(self):
        self._tensors = {}
        self._m = {}
        self._v = {}
        self.step_count = 0

    def add(self, name, tensor):
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name: {name}")
        if not isinstance(tensor, Tensor):
            tensor = Tensor(tensor)
        tensor.requires_grad = True
        self._tensors[name] = tensor
        self._m[name] = np.zeros_like(tensor.data)
        self._v[name] = np.zeros_like(tensor.data)
        return tensor

    def __getitem__(self, name):
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def __len__(self):
        return len(self._tensors)

    def names(self):
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def zero_grad(self):
        for t in self._tensors.values():
            t.grad = None

    def n_values(self):
        return sum(t.data.size for t in self._tensors.values())

    def value_dict(self):
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def load_values(self, values):
        missing = set(self._tensors) - set(values)
        extra = set(values) - set(self._tensors)
        if missing or extra:
            raise ValueError(f"parameter name mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, arr in values.items():
            t = self._tensors[name]
            if arr.shape != t.data.shape:
                raise ShapeError(f"parameter {name}: stored shape {arr.shape} != model shape {t.data.shape}")
            t.data[...] = arr

    def adam_state(self, name):
        return self._m[name], self._v[name]


def adam_step(params, lr, l2=0.0, beta1=0.9, beta2=0.999, eps=1e-8, grads=None):
    """One Adam update over every parameter in `params`.

    Gradients default to each tensor's accumulated ``.grad`` (missing grad
    counts as zero); pass `grads` (name -> array) to override.  The L2 term
    ``l2 * theta`` is added to the gradient before the moment updates, i.e.
    classic coupled weight decay.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    params.step_count += 1
    t = params.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads.get(name) if grads is not None else p.grad
        if g is None:
            g = np.zeros_like(p.data)
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter has {p.data.shape}")
        if l2:
            g = g + l2 * p.data
        m, v = params.adam_state(name)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
