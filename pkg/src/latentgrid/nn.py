"""Layers and parameter bookkeeping on top of the autodiff engine."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import ContractError, DegenerateBatchError
from .tensor import Tensor


class Parameter(Tensor):
    """A tensor that always participates in gradients, addressable by name.

    Names are dotted attribute paths assigned when the owning model is
    walked (e.g. "encoder.f1.lin1.w"); they key checkpoint manifests.
    """

    __slots__ = ("name",)

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name


class Module:
    """Minimal container: tracks Parameters/submodules via attributes."""

    extra_state: tuple = ()

    def __init__(self):
        self.training = True

    def _children(self):
        for key, value in vars(self).items():
            if key == "training":
                continue
            if isinstance(value, (Parameter, Module)):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, (Parameter, Module)):
                        yield f"{key}.{i}", item

    def named_parameters(self, prefix: str = ""):
        out = []
        for key, value in self._children():
            path = f"{prefix}.{key}" if prefix else key
            if isinstance(value, Parameter):
                value.name = path
                out.append((path, value))
            else:
                out.extend(value.named_parameters(path))
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_modules(self, prefix: str = ""):
        yield prefix, self
        for key, value in self._children():
            if isinstance(value, Module):
                path = f"{prefix}.{key}" if prefix else key
                yield from value.named_modules(path)

    def state_arrays(self) -> dict:
        """Everything needed to restore the module: parameters plus any
        non-trainable state a submodule declares in extra_state (e.g. batch
        norm running statistics)."""
        out = {name: p.data.copy() for name, p in self.named_parameters()}
        for mpath, mod in self.named_modules():
            for attr in mod.extra_state:
                key = f"{mpath}.{attr}" if mpath else attr
                out[key] = np.asarray(getattr(mod, attr)).copy()
        return out

    def load_state_arrays(self, state: dict) -> None:
        expected = self.state_arrays()
        missing = sorted(set(expected) - set(state))
        unexpected = sorted(set(state) - set(expected))
        if missing or unexpected:
            raise ContractError(
                f"state mismatch: missing {missing}, unexpected {unexpected}"
            )
        params = dict(self.named_parameters())
        extras = {}
        for mpath, mod in self.named_modules():
            for attr in mod.extra_state:
                extras[f"{mpath}.{attr}" if mpath else attr] = (mod, attr)
        for key, value in state.items():
            if key in params:
                if params[key].data.shape != value.shape:
                    raise ContractError(
                        f"shape mismatch for {key}: model {params[key].data.shape},"
                        f" state {value.shape}"
                    )
                params[key].data = value.astype(params[key].data.dtype, copy=True)
            else:
                mod, attr = extras[key]
                current = np.asarray(getattr(mod, attr))
                setattr(mod, attr, value.astype(current.dtype, copy=True))

    def train_mode(self, flag: bool = True):
        self.training = flag
        for _, child in self._children():
            if isinstance(child, Module):
                child.train_mode(flag)
        return self

    def eval_mode(self):
        return self.train_mode(False)

    def zero_grads(self):
        for p in self.parameters():
            p.grad = None

    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(T.default_dtype())


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        super().__init__()
        self.w = Parameter(glorot_uniform(rng, in_dim, out_dim, (in_dim, out_dim)))
        self.b = Parameter(np.zeros(out_dim, dtype=T.default_dtype()))

    def forward(self, x: Tensor) -> Tensor:
        return T.matmul(x, self.w) + self.b


class BatchNorm(Module):
    """Normalize the trailing feature axis with batch statistics.

    Training mode uses batch mean/std and updates running estimates
    (momentum 0.1, unbiased running variance); eval mode uses the running
    estimates. Learnable per-feature scale and shift.
    """

    extra_state = ("running_mean", "running_var")

    def __init__(self, width: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.gamma = Parameter(np.ones(width, dtype=T.default_dtype()))
        self.beta = Parameter(np.zeros(width, dtype=T.default_dtype()))
        self.momentum = momentum
        self.eps = eps
        self.running_mean = np.zeros(width, dtype=np.float64)
        self.running_var = np.ones(width, dtype=np.float64)

    def forward(self, x: Tensor) -> Tensor:
        if self.training:
            m = int(np.prod(x.shape[:-1]))
            if m < 2:
                raise DegenerateBatchError(f"batch norm needs >= 2 rows in training mode, got {m}")
            out, mu, var = T.batch_norm_train(x, self.gamma, self.beta, self.eps)
            unbiased = var * (m / (m - 1))
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mu.astype(np.float64)
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * unbiased.astype(np.float64)
            return out
        rm = self.running_mean.astype(x.dtype)
        rv = self.running_var.astype(x.dtype)
        return T.batch_norm_eval(x, self.gamma, self.beta, rm, rv, self.eps)


class MLP2(Module):
    """Two-layer perceptron: linear-ELU-linear-ELU with a trailing batch norm."""

    def __init__(self, in_dim: int, hidden: int, out_dim: int, rng: np.random.Generator,
                 batch_norm: bool = True):
        super().__init__()
        self.lin1 = Linear(in_dim, hidden, rng)
        self.lin2 = Linear(hidden, out_dim, rng)
        self.bn = BatchNorm(out_dim) if batch_norm else None

    def forward(self, x: Tensor) -> Tensor:
        h = T.elu(self.lin2(T.elu(self.lin1(x))))
        if self.bn is not None:
            h = self.bn(h)
        return h
