"""Single-hidden-layer perceptron trained by Levenberg-Marquardt with early stopping.

Hidden units use ``tanh``, the output unit is linear. Inputs are mapped onto
[-1, 1] with the per-column min/max of the training set.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np

FORMAT_VERSION = 1

_SUPERSCRIPTS = str.maketrans("⁰¹²³⁴⁵⁶⁷⁸⁹", "0123456789")
# architecture field -> (canonical symbol, series channel)
_EXO_FIELDS = (("cloud", "N", "cloudiness"), ("pressure", "P", "pressure"), ("precip", "RP", "precipitation"))


class MlpError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, message, log):
        super().__init__(message)
        self.log = log


@dataclass(frozen=True)
class MlpArchitecture:
    endo: int
    cloud: int = 0
    pressure: int = 0
    precip: int = 0
    hidden: int = 10
    output: int = 1

    def __post_init__(self):
        if self.endo < 1:
            raise MlpError("at least one endogenous input is required")
        if self.hidden < 1:
            raise MlpError("hidden layer needs at least one neuron")
        if self.output != 1:
            raise MlpError("only a single output neuron is supported")
        if min(self.cloud, self.pressure, self.precip) < 0:
            raise MlpError("lag counts must be non-negative")

    @property
    def n_inputs(self) -> int:
        return self.endo + self.cloud + self.pressure + self.precip

    @property
    def max_lag(self) -> int:
        return max(self.endo, self.cloud, self.pressure, self.precip)

    @property
    def n_params(self) -> int:
        return self.hidden * (self.n_inputs + 2) + 1

    def exogenous(self) -> dict[str, int]:
        """Lag count per series channel name (zero counts omitted)."""
        return {channel: getattr(self, f) for f, _, channel in _EXO_FIELDS if getattr(self, f)}

    @property
    def canonical(self) -> str:
        terms = [f"endo^{self.endo}"]
        terms += [f"{sym}^{getattr(self, f)}" for f, sym, _ in _EXO_FIELDS if getattr(self, f)]
        return f"({', '.join(terms)})x{self.hidden}x{self.output}"

    def __str__(self):
        return self.canonical

    @classmethod
    def parse(cls, text: str) -> "MlpArchitecture":
        s = text.translate(_SUPERSCRIPTS).replace("×", "x").replace(" ", "")
        m = re.fullmatch(r"\((.*)\)x(\d+)x(\d+)", s)
        if not m:
            raise MlpError(f"not a canonical architecture: {text!r}")
        counts = {"endo": 0, "N": 0, "P": 0, "RP": 0}
        for term in m.group(1).split(","):
            tm = re.fullmatch(r"(endo|N|P|RP)\^?(\d+)", term)
            if not tm:
                raise MlpError(f"bad term {term!r} in {text!r}")
            counts[tm.group(1)] = int(tm.group(2))
        return cls(counts["endo"], counts["N"], counts["P"], counts["RP"],
                   int(m.group(2)), int(m.group(3)))

    @classmethod
    def from_lags(cls, endo: int, exo: Mapping[str, int], hidden: int) -> "MlpArchitecture":
        kwargs = {f: int(exo.get(channel, 0)) for f, _, channel in _EXO_FIELDS}
        return cls(endo=endo, hidden=hidden, **kwargs)


@dataclass(frozen=True)
class TrainConfig:
    max_fail: int = 5
    mu_init: float = 0.001
    mu_decrease: float = 0.1
    mu_increase: float = 10.0
    mu_max: float = 1e10
    goal: float = 0.0
    max_epochs: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_fail < 1:
            raise MlpError("max_fail must be >= 1")
        if min(self.mu_init, self.mu_decrease, self.mu_increase) <= 0:
            raise MlpError("mu factors must be positive")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_mse: float
    val_mse: float
    mu: float


@dataclass(frozen=True)
class MlpModel:
    architecture: MlpArchitecture
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    in_min: np.ndarray | None = None
    in_max: np.ndarray | None = None
    training_log: tuple[EpochRecord, ...] = ()
    best_epoch: int = 0
    stop_reason: str = ""

    @property
    def params(self) -> np.ndarray:
        return np.concatenate((self.w1.ravel(), self.b1, self.w2, [self.b2]))

    def with_params(self, theta: np.ndarray) -> "MlpModel":
        h, i = self.w1.shape
        a = h * i
        return replace(self, w1=theta[:a].reshape(h, i).copy(), b1=theta[a:a + h].copy(),
                       w2=theta[a + h:a + 2 * h].copy(), b2=float(theta[-1]))

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "mlp",
            "architecture": self.architecture.canonical,
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": float(self.b2),
            "in_min": None if self.in_min is None else self.in_min.tolist(),
            "in_max": None if self.in_max is None else self.in_max.tolist(),
            "best_epoch": self.best_epoch,
            "stop_reason": self.stop_reason,
            "training_log": [[r.epoch, r.train_mse, r.val_mse, r.mu] for r in self.training_log],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        if d.get("kind") != "mlp" or d.get("format_version") != FORMAT_VERSION:
            raise MlpError(f"unsupported MLP record (kind={d.get('kind')}, version={d.get('format_version')})")
        arr = lambda v: None if v is None else np.array(v, dtype=np.float64)  # noqa: E731
        log = tuple(EpochRecord(int(e), t, v, m) for e, t, v, m in d.get("training_log", []))
        return cls(MlpArchitecture.parse(d["architecture"]), arr(d["w1"]), arr(d["b1"]), arr(d["w2"]),
                   float(d["b2"]), arr(d["in_min"]), arr(d["in_max"]), log,
                   int(d.get("best_epoch", 0)), d.get("stop_reason", ""))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "MlpModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def build(arch: MlpArchitecture, seed: int = 0) -> MlpModel:
    """Random initial weights, uniform in [-0.5, 0.5] / sqrt(fan-in)."""
    rng = np.random.default_rng(seed)
    n_in, h = arch.n_inputs, arch.hidden
    s1, s2 = 1.0 / np.sqrt(n_in), 1.0 / np.sqrt(h)
    w1 = rng.uniform(-0.5, 0.5, (h, n_in)) * s1
    b1 = rng.uniform(-0.5, 0.5, h) * s1
    w2 = rng.uniform(-0.5, 0.5, h) * s2
    b2 = float(rng.uniform(-0.5, 0.5) * s2)
    return MlpModel(arch, w1, b1, w2, b2)


def normalize_inputs(model: MlpModel, inputs) -> MlpModel:
    """Fit the per-column map sending training min to -1 and max to +1.

    A constant column is sent to 0.
    """
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.architecture.n_inputs:
        raise MlpError(f"expected {model.architecture.n_inputs} input columns, got shape {X.shape}")
    lo, hi = X.min(axis=0), X.max(axis=0)
    # a constant column maps to 0
    const = hi - lo <= 0
    lo, hi = np.where(const, lo - 1.0, lo), np.where(const, hi + 1.0, hi)
    return replace(model, in_min=lo, in_max=hi)


def scale_inputs(model: MlpModel, inputs) -> np.ndarray:
    """Apply the fitted input map (values outside the training range extrapolate)."""
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if X.shape[1] != model.architecture.n_inputs:
        raise MlpError(f"arity mismatch: net takes {model.architecture.n_inputs} inputs, got {X.shape[1]}")
    if model.in_min is None:
        return X
    return 2.0 * (X - model.in_min) / (model.in_max - model.in_min) - 1.0


def _forward(model: MlpModel, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    hidden = np.tanh(Z @ model.w1.T + model.b1)
    return hidden @ model.w2 + model.b2, hidden


def _jacobian_scaled(model: MlpModel, Z: np.ndarray) -> np.ndarray:
    out, hidden = _forward(model, Z)
    n = Z.shape[0]
    delta = (1.0 - hidden ** 2) * model.w2  # d out / d pre-activation, (n, H)
    d_w1 = (delta[:, :, None] * Z[:, None, :]).reshape(n, -1)
    return np.hstack((d_w1, delta, hidden, np.ones((n, 1))))


def jacobian(model: MlpModel, inputs) -> np.ndarray:
    """Derivatives of each sample's output (hence its error) with respect to every weight.

    Columns follow :attr:`MlpModel.params`: hidden weights (row-major), hidden
    biases, output weights, output bias.
    """
    return _jacobian_scaled(model, scale_inputs(model, inputs))


def predict(model: MlpModel, inputs) -> np.ndarray:
    out, _ = _forward(model, scale_inputs(model, inputs))
    return out


def forecast_one_step(model: MlpModel, lagged_inputs) -> float:
    x = np.asarray(lagged_inputs, dtype=np.float64).ravel()
    if x.size != model.architecture.n_inputs:
        raise MlpError(f"arity mismatch: net takes {model.architecture.n_inputs} inputs, got {x.size}")
    return float(predict(model, x[None, :])[0])


def _mse(model, Z, t):
    out, _ = _forward(model, Z)
    e = out - t
    return float(np.dot(e, e) / len(e)), e


def train_lm(model: MlpModel, train_x, train_y, val_x, val_y, cfg: TrainConfig = TrainConfig()) -> MlpModel:
    """Levenberg-Marquardt training with validation early stopping.

    Each epoch takes one accepted damped Gauss-Newton step (``mu`` is multiplied by
    ``mu_increase`` until the training error drops, then by ``mu_decrease``).
    Training stops at ``max_epochs``, when the training MSE reaches ``goal``, when
    ``mu`` exceeds ``mu_max``, or after ``max_fail`` consecutive epochs without a
    new best validation error. The weights of the best validation epoch are returned.
    If the model has no input normalization yet it is fitted on ``train_x``.
    """
    train_y = np.asarray(train_y, dtype=np.float64)
    val_y = np.asarray(val_y, dtype=np.float64)
    if len(train_y) == 0 or len(val_y) == 0:
        raise MlpError("training and validation sets must be non-empty")
    if model.in_min is None:
        model = normalize_inputs(model, train_x)
    Z = scale_inputs(model, train_x)
    Zv = scale_inputs(model, val_x)
    n_params = model.params.size

    mu = cfg.mu_init
    train_mse, e = _mse(model, Z, train_y)
    val_mse, _ = _mse(model, Zv, val_y)
    log = [EpochRecord(0, train_mse, val_mse, mu)]
    best, best_val, best_epoch = model, val_mse, 0
    fails = 0
    reason = "max_epochs"
    if not (np.isfinite(train_mse) and np.isfinite(val_mse)):
        raise TrainingDiverged("non-finite loss at epoch 0", log)
    if train_mse <= cfg.goal:
        return replace(model, training_log=tuple(log), best_epoch=0, stop_reason="goal")

    eye = np.eye(n_params)
    for epoch in range(1, cfg.max_epochs + 1):
        J = _jacobian_scaled(model, Z)
        JtJ = J.T @ J
        g = J.T @ e
        sse = train_mse * len(e)
        theta = model.params
        while True:
            try:
                step = np.linalg.solve(JtJ + mu * eye, -g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None:
                candidate = model.with_params(theta + step)
                cand_mse, cand_e = _mse(candidate, Z, train_y)
                if np.isfinite(cand_mse) and cand_mse * len(e) < sse:
                    model, train_mse, e = candidate, cand_mse, cand_e
                    mu *= cfg.mu_decrease
                    break
            mu *= cfg.mu_increase
            if mu > cfg.mu_max:
                break
        if mu > cfg.mu_max:
            reason = "mu_max"
            break
        val_mse, _ = _mse(model, Zv, val_y)
        log.append(EpochRecord(epoch, train_mse, val_mse, mu))
        if not (np.isfinite(train_mse) and np.isfinite(val_mse)):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}", log)
        if val_mse < best_val:
            best, best_val, best_epoch, fails = model, val_mse, epoch, 0
        elif val_mse > best_val:
            fails += 1
        if fails >= cfg.max_fail:
            reason = "max_fail"
            break
        if train_mse <= cfg.goal:
            reason = "goal"
            break
    return replace(best, training_log=tuple(log), best_epoch=best_epoch, stop_reason=reason)


def lagged_design(endo, arch: MlpArchitecture, channels: Mapping[str, np.ndarray] | None = None,
                  targets=None) -> tuple[np.ndarray, np.ndarray]:
    """Input rows for one-step forecasting.

    Row ``r`` predicts position ``index[r]`` from ``endo[j-1], ..., endo[j-e]``
    followed by the lagged exogenous channels in N, P, RP order. Returns
    ``(inputs, index)``; ``targets`` restricts the predicted positions.
    """
    endo = np.asarray(endo, dtype=np.float64)
    channels = channels or {}
    n = len(endo)
    start = arch.max_lag
    index = np.arange(start, n) if targets is None else np.asarray(targets, dtype=np.int64)
    if index.size and index.min() < start:
        raise MlpError(f"targets before position {start} lack enough history")
    cols = [endo[index - k] for k in range(1, arch.endo + 1)]
    for channel, count in arch.exogenous().items():
        if channel not in channels or channels[channel] is None:
            raise MlpError(f"architecture needs channel {channel!r}, which is absent")
        values = np.asarray(channels[channel], dtype=np.float64)
        cols += [values[index - k] for k in range(1, count + 1)]
    return np.column_stack(cols) if cols else np.zeros((len(index), 0)), index
