"""End-to-end training: Adam, time-reversal augmentation, early stopping.

The encoder, sampler, extractor, and classifier train jointly against
cross-entropy on event labels; gradients reach the encoder through the
relaxed sampler. Validation runs in eval mode with the hard threshold
sampler, matching how the model is used after training. The best
validation checkpoint is retained and restored at the end.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError, ParameterError
from .model import EventIdentifier, ModelConfig, build_model
from .nn import Module
from .tensor import Tensor


@dataclass
class TrainConfig:
    batch_size: int = 16
    epochs: int = 50
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    sampler_mode: str = "gumbel_softmax"
    augment: bool = True
    noise_var: float = 0.04
    patience: int = 10

    def __post_init__(self):
        if self.batch_size < 2:
            raise ParameterError(
                f"batch_size must be >= 2 for batch norm, got {self.batch_size}"
            )
        if self.lr <= 0 or self.epochs < 1 or self.patience < 1:
            raise ParameterError("lr, epochs, and patience must be positive")
        if self.noise_var < 0:
            raise ParameterError(f"noise_var must be >= 0, got {self.noise_var}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        unknown = set(payload) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**payload)


class Adam:
    """Bias-corrected adaptive moments, one slot pair per parameter."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)


def time_reverse(x: np.ndarray) -> np.ndarray:
    """Reverse the trailing time axis for every node identically."""
    return np.ascontiguousarray(x[..., ::-1])


def augment(x: np.ndarray, y: np.ndarray, seed, noise_var: float = 0.04,
            split: str = "train"):
    """Append a time-reversed, noise-perturbed copy of every sample.

    Only the training split may be augmented; the copy keeps its label.
    Noise is Gaussian with the given variance, in the (standardized) units
    of x.
    """
    if split != "train":
        raise ContractError(f"augmentation is train-only, got split {split!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    flipped = time_reverse(x)
    if noise_var > 0:
        flipped = flipped + rng.normal(0.0, np.sqrt(noise_var), size=flipped.shape)
    return (
        np.concatenate([x, flipped.astype(x.dtype)], axis=0),
        np.concatenate([y, y], axis=0),
    )


@dataclass
class TrainResult:
    history: list
    best_epoch: int
    best_val_acc: float
    epochs_run: int
    state: dict = field(repr=False, default_factory=dict)

    def history_rows(self):
        cols = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")
        return [cols] + [[row[c] for c in cols] for row in self.history]


def snapshot_state(model: Module) -> dict:
    """Parameters plus batch norm running statistics, deep-copied."""
    return model.state_arrays()


def restore_state(model: Module, state: dict) -> None:
    model.load_state_arrays(state)


def evaluate_arrays(model: EventIdentifier, x: np.ndarray, y: np.ndarray,
                    batch_size: int = 64, mode: str = None, r: float = None):
    """(mean loss, accuracy, stacked probs) in eval mode, gradient-free."""
    if len(x) == 0:
        raise ContractError("empty evaluation set")
    was_training = model.training
    model.eval_mode()
    losses, probs_out = [], []
    with T.no_grad():
        for start in range(0, len(x), batch_size):
            xb = x[start : start + batch_size]
            yb = y[start : start + batch_size]
            out = model(xb, mode=mode, r=r)
            losses.append(float(T.cross_entropy(out.logits, yb).data) * len(xb))
            probs_out.append(out.probs.data)
    model.train_mode(was_training)
    probs = np.concatenate(probs_out, axis=0)
    acc = float((np.argmax(probs, axis=1) == y).mean())
    return sum(losses) / len(x), acc, probs


def train(model: EventIdentifier, data, config: TrainConfig,
          out_dir=None, log=None) -> TrainResult:
    """Fit on data.train_*, early-stop on validation accuracy.

    `data` is any object with train_x/train_y/val_x/val_y arrays (the
    preprocess module's PreparedData fits). Returns the history plus the
    best-validation parameter snapshot, already restored into the model.
    """
    master = np.random.SeedSequence(config.seed)
    shuffle_rng, forward_rng, augment_rng = (
        np.random.default_rng(s) for s in master.spawn(3)
    )

    x_tr, y_tr = data.train_x, data.train_y
    if config.augment:
        x_tr, y_tr = augment(x_tr, y_tr, augment_rng, config.noise_var)

    opt = Adam(model.parameters(), config.lr, config.beta1, config.beta2, config.eps)
    history = []
    best_val_acc, best_epoch = -1.0, -1
    best_state = snapshot_state(model)

    for epoch in range(1, config.epochs + 1):
        model.train_mode()
        order = shuffle_rng.permutation(len(x_tr))
        losses, hits, seen = [], 0, 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            if len(idx) < 2:
                continue  # batch norm needs at least two rows
            xb, yb = x_tr[idx], y_tr[idx]
            out = model(xb, mode=config.sampler_mode, rng=forward_rng)
            loss = T.cross_entropy(out.logits, yb)
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                pnorm = float(
                    np.sqrt(sum(float((p.data**2).sum()) for p in model.parameters()))
                )
                raise ContractError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                    f" (parameter norm {pnorm:.3e})"
                )
            model.zero_grads()
            loss.backward()
            opt.step()
            losses.append(loss_val * len(idx))
            hits += int((np.argmax(out.probs.data, axis=1) == yb).sum())
            seen += len(idx)

        val_loss, val_acc, _ = evaluate_arrays(
            model, data.val_x, data.val_y, batch_size=max(config.batch_size, 64)
        )
        row = {
            "epoch": epoch,
            "train_loss": sum(losses) / seen,
            "train_acc": hits / seen,
            "val_loss": val_loss,
            "val_acc": val_acc,
        }
        history.append(row)
        if log:
            log(
                f"epoch {epoch:3d}  train_loss {row['train_loss']:.4f}  "
                f"train_acc {row['train_acc']:.3f}  val_loss {val_loss:.4f}  "
                f"val_acc {val_acc:.3f}"
            )
        if val_acc > best_val_acc:
            best_val_acc, best_epoch = val_acc, epoch
            best_state = snapshot_state(model)
        elif epoch - best_epoch >= config.patience:
            break

    restore_state(model, best_state)
    model.eval_mode()
    result = TrainResult(history, best_epoch, best_val_acc, len(history), best_state)
    if out_dir is not None:
        write_history(Path(out_dir) / "history.csv", result)
    return result


def write_history(path, result: TrainResult) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(result.history_rows())


# ---------------------------------------------------------------------------
# random hyperparameter search


SEARCHABLE_MODEL = {
    "encoder_hidden", "classifier_hidden", "feat_channels", "dilations",
    "tau", "r_threshold", "dropout", "kernel",
}
SEARCHABLE_TRAIN = {"lr", "batch_size", "noise_var", "sampler_mode"}


def _draw_value(spec, rng: np.random.Generator):
    if isinstance(spec, dict) and "choices" in spec:
        values = spec["choices"]
        if not values:
            raise ParameterError("empty choices list in search space")
        return values[int(rng.integers(0, len(values)))]
    if isinstance(spec, dict) and "uniform" in spec:
        lo, hi = spec["uniform"]
        return float(rng.uniform(lo, hi))
    if isinstance(spec, dict) and "loguniform" in spec:
        lo, hi = spec["loguniform"]
        if lo <= 0 or hi <= lo:
            raise ParameterError(f"loguniform needs 0 < lo < hi, got {lo}, {hi}")
        return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    raise ParameterError(
        f"search entry must specify choices/uniform/loguniform, got {spec!r}"
    )


def sample_trial_configs(space: dict, base_model: ModelConfig,
                         base_train: TrainConfig, rng: np.random.Generator):
    """One random draw from the space applied over the base configs."""
    model_kw, train_kw = {}, {}
    for key, spec in space.items():
        value = _draw_value(spec, rng)
        if key in SEARCHABLE_MODEL:
            model_kw[key] = tuple(value) if key == "dilations" else value
        elif key in SEARCHABLE_TRAIN:
            value = int(value) if key == "batch_size" else value
            train_kw[key] = value
        else:
            raise ParameterError(
                f"unknown search key {key!r}; model keys {sorted(SEARCHABLE_MODEL)}, "
                f"train keys {sorted(SEARCHABLE_TRAIN)}"
            )
    return replace(base_model, **model_kw), replace(base_train, **train_kw)


def random_search(space: dict, data, budget: int, base_model: ModelConfig,
                  base_train: TrainConfig, seed: int = 0, log=None) -> list:
    """Independent uniform draws, each trained briefly, ranked by val accuracy."""
    if budget < 1:
        raise ParameterError(f"budget must be >= 1, got {budget}")
    master = np.random.SeedSequence(seed)
    trials = []
    for k, child in enumerate(master.spawn(budget)):
        rng = np.random.default_rng(child)
        model_cfg, train_cfg = sample_trial_configs(space, base_model, base_train, rng)
        train_cfg = replace(train_cfg, seed=int(child.generate_state(1)[0]))
        model = build_model(model_cfg, seed=train_cfg.seed)
        result = train(model, data, train_cfg)
        trials.append(
            {
                "trial": k,
                "model_config": model_cfg.to_dict(),
                "train_config": train_cfg.to_dict(),
                "val_acc": result.best_val_acc,
                "best_epoch": result.best_epoch,
                "epochs_run": result.epochs_run,
            }
        )
        if log:
            log(f"trial {k}: val_acc {result.best_val_acc:.3f}")
    trials.sort(key=lambda t: (-t["val_acc"], t["trial"]))
    return trials


def write_trials(path, trials: list) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(trials, fh, indent=2, sort_keys=True)
        fh.write("\n")
