"""Mixture of ELM experts combined by a trainable ELM gate.

Training is a single pass:

1. every expert and the gate get frozen random hidden weights, each from a
   seed derived from ``(base_seed, index)``;
2. the experts solve their output weights on the full training set;
3. the experts' training-set outputs define the gate's target matrix, a
   row-wise softmax of ``-gamma * ||y_i - O_i^j||^2`` over experts;
4. the gate solves its output weights against that target.

At prediction time the gate's raw outputs are softmaxed into per-sample
expert weights and the expert scores are mixed with them. The class is the
argmax of the mixed score, ties going to the lowest index.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .data import NormalizerParams
from .elm import SEED_MAX, ElmConfig, ElmModel, init_random
from .linalg import ShapeError, as_matrix

__all__ = [
    "FORMAT_VERSION",
    "MeetgConfig",
    "MeetgModel",
    "ModelFormatError",
    "ModelVersionError",
    "derive_seed",
    "softmax",
    "gating_target",
    "train_meetg",
    "gate_weights",
    "predict_meetg",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
]

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Malformed model file. ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ModelVersionError(ModelFormatError):
    pass


@dataclass(frozen=True)
class MeetgConfig:
    n_experts: int = 3
    expert_hidden: int = 20
    gate_hidden: int = 20
    error_scale: float = 0.5
    base_seed: int = 0
    sv_cutoff_factor: float | None = None
    weight_range: tuple = (-1.0, 1.0)

    def __post_init__(self):
        # k = 1 is structurally valid (degenerate mixture); train_meetg demands k >= 2
        for name in ("n_experts", "expert_hidden", "gate_hidden"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not self.error_scale > 0:
            raise ValueError(f"error_scale must be > 0, got {self.error_scale}")
        if self.sv_cutoff_factor is not None and self.sv_cutoff_factor < 0:
            raise ValueError(f"sv_cutoff_factor must be >= 0, got {self.sv_cutoff_factor}")
        if not 0 <= self.base_seed <= SEED_MAX:
            raise ValueError(f"base_seed must be a 64-bit unsigned integer, got {self.base_seed}")
        object.__setattr__(self, "weight_range", tuple(float(v) for v in self.weight_range))


def derive_seed(base_seed, index):
    """Stable 64-bit seed for submodel `index`: SeedSequence hash of (base_seed, index)."""
    state = np.random.SeedSequence([int(base_seed), int(index)]).generate_state(1, np.uint64)
    return int(state[0])


def softmax(z):
    """Row-wise softmax with max subtraction."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def gating_target(y, expert_outputs, error_scale=0.5):
    """Gate target matrix (N x k) from the experts' squared errors.

    Entry ``(i, j)`` is ``exp(-gamma * e_ij) / sum_j' exp(-gamma * e_ij')`` with
    ``e_ij = ||y_i - O_i^j||^2``, so the most accurate expert on a sample gets
    the largest target.
    """
    if not error_scale > 0:
        raise ValueError(f"error_scale must be > 0, got {error_scale}")
    y = as_matrix(y, "y")
    if len(expert_outputs) < 1:
        raise ShapeError("expert_outputs is empty")
    sq_err = np.empty((y.shape[0], len(expert_outputs)))
    for j, out in enumerate(expert_outputs):
        out = as_matrix(out, f"expert_outputs[{j}]")
        if out.shape != y.shape:
            raise ShapeError(f"expert_outputs[{j}] has shape {out.shape}, y has {y.shape}")
        sq_err[:, j] = np.sum((y - out) ** 2, axis=1)
    return softmax(-error_scale * sq_err)


class MeetgModel:
    """Trained mixture: ``k`` experts (d -> m), one gate (d -> k), class labels.

    `normalizer` optionally records the min-max scaling the model was trained
    under. It is stored in the model file but never applied implicitly.
    """

    def __init__(self, config, experts, gate, label_map=None, normalizer=None):
        experts = list(experts)
        if len(experts) != config.n_experts:
            raise ValueError(f"config.n_experts is {config.n_experts} but {len(experts)} experts given")
        d = experts[0].config.input_dim
        m = experts[0].config.output_dim
        for j, e in enumerate(experts):
            if (e.config.input_dim, e.config.output_dim) != (d, m):
                raise ShapeError(
                    f"expert {j} maps {e.config.input_dim}->{e.config.output_dim}, expert 0 maps {d}->{m}"
                )
        if (gate.config.input_dim, gate.config.output_dim) != (d, len(experts)):
            raise ShapeError(
                f"gate maps {gate.config.input_dim}->{gate.config.output_dim}, expected {d}->{len(experts)}"
            )
        if not all(e.trained for e in experts) or not gate.trained:
            raise ValueError("all experts and the gate must be trained")
        if label_map is None:
            label_map = [str(c) for c in range(m)]
        if len(label_map) != m:
            raise ValueError(f"label_map has {len(label_map)} entries for {m} classes")
        self.config = config
        self.experts = tuple(experts)
        self.gate = gate
        self.label_map = tuple(label_map)
        self.normalizer = normalizer

    @property
    def input_dim(self):
        return self.experts[0].config.input_dim

    @property
    def class_count(self):
        return self.experts[0].config.output_dim

    def __repr__(self):
        return (
            f"MeetgModel(k={len(self.experts)}, d={self.input_dim}, m={self.class_count}, "
            f"L_e={self.config.expert_hidden}, L_g={self.config.gate_hidden})"
        )


def _train_one(cfg, x, y, sv_cutoff_factor):
    return init_random(cfg).train(x, y, sv_cutoff_factor)


def train_meetg(config, x, y, label_map=None, threads=1, expert_seeds=None):
    """Train experts and gate on the full training set.

    Expert ``j`` is seeded with ``derive_seed(base_seed, j)`` and the gate with
    ``derive_seed(base_seed, k)``, so the result does not depend on `threads`.
    `expert_seeds` overrides the derived expert seeds (test harness use).
    """
    if config.n_experts < 2:
        raise ValueError(f"training needs at least 2 experts, got {config.n_experts}")
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
    n, d = x.shape
    m = y.shape[1]
    k = config.n_experts

    if expert_seeds is None:
        expert_seeds = [derive_seed(config.base_seed, j) for j in range(k)]
    elif len(expert_seeds) != k:
        raise ValueError(f"expected {k} expert seeds, got {len(expert_seeds)}")
    expert_cfgs = [
        ElmConfig(config.expert_hidden, d, m, config.weight_range, int(s)) for s in expert_seeds
    ]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            experts = list(pool.map(lambda c: _train_one(c, x, y, config.sv_cutoff_factor), expert_cfgs))
    else:
        experts = [_train_one(c, x, y, config.sv_cutoff_factor) for c in expert_cfgs]

    target = gating_target(y, [e.predict(x) for e in experts], config.error_scale)
    gate_cfg = ElmConfig(config.gate_hidden, d, k, config.weight_range, derive_seed(config.base_seed, k))
    gate = _train_one(gate_cfg, x, target, config.sv_cutoff_factor)
    log.debug("trained MEETG k=%d L_e=%d L_g=%d on %d samples", k, config.expert_hidden, config.gate_hidden, n)
    return MeetgModel(config, experts, gate, label_map)


def gate_weights(model, x):
    """Per-sample expert weights: softmax of the gate's raw outputs, shape (N, k)."""
    return softmax(model.gate.predict(x))


def predict_meetg(model, x):
    """Return ``(scores, labels)``: gate-weighted expert scores and their argmax."""
    g = gate_weights(model, x)
    scores = np.zeros((g.shape[0], model.class_count))
    for j, expert in enumerate(model.experts):
        scores += g[:, j : j + 1] * expert.predict(x)
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return scores, np.argmax(scores, axis=1)


# -- serialization -----------------------------------------------------------


def _elm_to_dict(model):
    c = model.config
    return {
        "hidden_neurons": c.hidden_neurons,
        "input_dim": c.input_dim,
        "output_dim": c.output_dim,
        "weight_range": list(c.weight_range),
        "seed": c.seed,
        "W": model.input_weights.tolist(),
        "b": model.biases.tolist(),
        "beta": model.output_weights.tolist(),
    }


def model_to_dict(model):
    out = {
        "format_version": FORMAT_VERSION,
        "config": {**asdict(model.config), "weight_range": list(model.config.weight_range)},
        "label_map": list(model.label_map),
        "experts": [_elm_to_dict(e) for e in model.experts],
        "gate": _elm_to_dict(model.gate),
    }
    if model.normalizer is not None:
        out["normalizer"] = {
            "kind": "minmax",
            "min": model.normalizer.minimum.tolist(),
            "max": model.normalizer.maximum.tolist(),
        }
    return out


def _field(obj, key, path, kind=None):
    if not isinstance(obj, dict):
        raise ModelFormatError(path, f"expected an object, got {type(obj).__name__}")
    if key not in obj:
        raise ModelFormatError(f"{path}.{key}" if path else key, "missing field")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise ModelFormatError(f"{path}.{key}" if path else key, f"expected {kind}, got {type(value).__name__}")
    return value


def _array(value, path, shape):
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(path, f"not a numeric array ({exc})") from None
    if arr.shape != shape:
        raise ModelFormatError(path, f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelFormatError(path, "contains NaN or Inf")
    return arr


def _elm_from_dict(obj, path):
    try:
        cfg = ElmConfig(
            _field(obj, "hidden_neurons", path, int),
            _field(obj, "input_dim", path, int),
            _field(obj, "output_dim", path, int),
            tuple(_field(obj, "weight_range", path, list)),
            _field(obj, "seed", path, int),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(path, str(exc)) from None
    L, d, m = cfg.hidden_neurons, cfg.input_dim, cfg.output_dim
    w = _array(_field(obj, "W", path), f"{path}.W", (L, d))
    b = _array(_field(obj, "b", path), f"{path}.b", (L,))
    beta = _array(_field(obj, "beta", path), f"{path}.beta", (L, m))
    return ElmModel(cfg, w, b, beta)


def model_from_dict(obj):
    version = _field(obj, "format_version", "", int)
    if version != FORMAT_VERSION:
        raise ModelVersionError("format_version", f"unsupported version {version}, this build reads {FORMAT_VERSION}")
    raw_cfg = _field(obj, "config", "", dict)
    try:
        config = MeetgConfig(**{**raw_cfg, "weight_range": tuple(raw_cfg.get("weight_range", (-1.0, 1.0)))})
    except TypeError as exc:
        raise ModelFormatError("config", str(exc)) from None
    except ValueError as exc:
        raise ModelFormatError("config", str(exc)) from None
    experts_raw = _field(obj, "experts", "", list)
    if len(experts_raw) != config.n_experts:
        raise ModelFormatError("experts", f"{len(experts_raw)} entries, config.n_experts is {config.n_experts}")
    experts = [_elm_from_dict(e, f"experts[{j}]") for j, e in enumerate(experts_raw)]
    gate = _elm_from_dict(_field(obj, "gate", "", dict), "gate")
    label_map = _field(obj, "label_map", "", list)
    normalizer = None
    if obj.get("normalizer") is not None:
        raw = _field(obj, "normalizer", "", dict)
        d = experts[0].config.input_dim
        normalizer = NormalizerParams(
            _array(_field(raw, "min", "normalizer"), "normalizer.min", (d,)),
            _array(_field(raw, "max", "normalizer"), "normalizer.max", (d,)),
        )
    try:
        return MeetgModel(config, experts, gate, [str(s) for s in label_map], normalizer)
    except ValueError as exc:
        raise ModelFormatError("", str(exc)) from None


def save_model(model, destination):
    """Write `model` as JSON. `destination` is a path or a text file object.

    Floats are written with ``repr`` precision, so a reload reproduces every
    weight bit for bit.
    """
    text = json.dumps(model_to_dict(model), indent=1)
    if hasattr(destination, "write"):
        destination.write(text)
        return
    tmp = f"{destination}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(text)
    os.replace(tmp, destination)


def load_model(source):
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as f:
            text = f.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError("", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return model_from_dict(obj)
