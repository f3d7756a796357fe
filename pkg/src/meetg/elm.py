"""Single hidden layer extreme learning machine.

Input weights and biases are drawn once from a seeded generator and never
touched again; only the hidden-to-output weights are solved, in closed form.

Random stream layout (stable, golden tests depend on it): the 64-bit seed
feeds ``np.random.SeedSequence(seed)``, which spawns two children. Child 0
drives a PCG64 generator that fills ``W`` row-major (neuron by neuron),
child 1 drives a second PCG64 that fills ``b``. Because each array has its
own stream, a model with ``2L`` neurons shares its first ``L`` neurons with
the ``L``-neuron model built from the same seed.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import ShapeError, as_matrix, solve_least_squares

__all__ = ["ElmConfig", "ElmModel", "NotTrainedError", "AlreadyTrainedError", "init_random", "sigmoid"]

SEED_MAX = 2**64 - 1


class NotTrainedError(RuntimeError):
    pass


class AlreadyTrainedError(RuntimeError):
    pass


@dataclass(frozen=True)
class ElmConfig:
    hidden_neurons: int
    input_dim: int
    output_dim: int
    weight_range: tuple = (-1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        for name in ("hidden_neurons", "input_dim", "output_dim"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        lo, hi = self.weight_range
        if not lo < hi:
            raise ValueError(f"weight_range lower bound must be below upper, got {self.weight_range}")
        if not 0 <= self.seed <= SEED_MAX:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "weight_range", (float(lo), float(hi)))


def sigmoid(z):
    # exp overflow for z << 0 gives inf, and 1/(1+inf) = 0 exactly; silence the warning
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


class ElmModel:
    """One ELM: frozen random ``W`` (L x d) and ``b`` (L,), solved ``beta`` (L x m).

    Built untrained by :func:`init_random`; :meth:`train` sets ``beta``
    exactly once. Predicting before training raises :class:`NotTrainedError`.
    """

    def __init__(self, config, input_weights, biases, output_weights=None):
        w = np.array(input_weights, dtype=np.float64)
        b = np.array(biases, dtype=np.float64).reshape(-1)
        shape = (config.hidden_neurons, config.input_dim)
        if w.shape != shape:
            raise ShapeError(f"input_weights shape {w.shape} does not match config {shape}")
        if b.shape != (config.hidden_neurons,):
            raise ShapeError(f"biases length {b.shape[0]} does not match hidden_neurons {config.hidden_neurons}")
        w.setflags(write=False)
        b.setflags(write=False)
        self.config = config
        self.input_weights = w
        self.biases = b
        self._beta = None
        if output_weights is not None:
            self._set_beta(output_weights)

    def __repr__(self):
        c = self.config
        state = "trained" if self.trained else "untrained"
        return f"ElmModel(d={c.input_dim}, L={c.hidden_neurons}, m={c.output_dim}, seed={c.seed}, {state})"

    @property
    def trained(self):
        return self._beta is not None

    @property
    def output_weights(self):
        if self._beta is None:
            return np.zeros((self.config.hidden_neurons, self.config.output_dim))
        return self._beta

    def _set_beta(self, beta):
        beta = np.array(beta, dtype=np.float64)
        shape = (self.config.hidden_neurons, self.config.output_dim)
        if beta.shape != shape:
            raise ShapeError(f"output_weights shape {beta.shape} does not match config {shape}")
        beta.setflags(write=False)
        self._beta = beta

    def hidden_output(self, x):
        """Sigmoid activations of every sample on every hidden neuron, shape (N, L)."""
        x = as_matrix(x, "x")
        if x.shape[1] != self.config.input_dim:
            raise ShapeError(f"x has {x.shape[1]} columns, model expects input_dim {self.config.input_dim}")
        return sigmoid(x @ self.input_weights.T + self.biases)

    def train(self, x, y, sv_cutoff_factor=None):
        """Solve ``beta = pinv(H) @ y`` in place and return self."""
        if self.trained:
            raise AlreadyTrainedError("model is already trained; build a new one with init_random")
        y = as_matrix(y, "y")
        if y.shape[1] != self.config.output_dim:
            raise ShapeError(f"y has {y.shape[1]} columns, model expects output_dim {self.config.output_dim}")
        h = self.hidden_output(x)
        if h.shape[0] != y.shape[0]:
            raise ShapeError(f"x has {h.shape[0]} rows but y has {y.shape[0]}")
        self._set_beta(solve_least_squares(h, y, sv_cutoff_factor))
        return self

    def predict(self, x):
        """Raw linear output scores, shape (N, m). No normalization is applied."""
        if not self.trained:
            raise NotTrainedError("predict called on an untrained model")
        return self.hidden_output(x) @ self._beta


def init_random(config):
    """Build an untrained :class:`ElmModel` with uniform random ``W`` and ``b``."""
    lo, hi = config.weight_range
    w_seq, b_seq = np.random.SeedSequence(config.seed).spawn(2)
    w = np.random.Generator(np.random.PCG64(w_seq)).uniform(lo, hi, size=config.hidden_neurons * config.input_dim)
    b = np.random.Generator(np.random.PCG64(b_seq)).uniform(lo, hi, size=config.hidden_neurons)
    return ElmModel(config, w.reshape(config.hidden_neurons, config.input_dim), b)
