"""Feed-forward networks trained by backpropagation and Adam.

Layer ``l`` computes ``a = z_prev @ W.T + b`` and ``z = f(a)`` with ``W`` of
shape ``(out, in)``. All weights and biases of a network live in one flat
float64 buffer; ``Network.weights`` / ``Network.biases`` are views into it, so
a single Adam state covers the whole network.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .container import Reader, Writer
from .errors import CorruptArtifactError, ParameterError, ShapeError, TrainingError, VersionError
from .numerics import Adam, as_matrix, make_rng

ACTIVATIONS = ("linear", "relu", "sigmoid", "tanh")
LOSSES = ("mse", "binary_cross_entropy")
NETWORK_MAGIC = b"BSNN"
NETWORK_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    width: int
    activation: str = "relu"

    def __post_init__(self):
        if self.width < 1:
            raise ParameterError("layer width must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")


def layers(widths, activation="relu"):
    return [LayerSpec(int(w), activation) for w in widths]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    loss: str = "binary_cross_entropy"

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ParameterError("learning_rate > 0, epochs >= 1 and batch_size >= 1 are required")
        if self.loss not in LOSSES:
            raise ParameterError(f"unknown loss {self.loss!r}")


def _activate(name, a):
    if name == "relu":
        return np.maximum(a, 0.0)
    if name == "sigmoid":
        return expit(a)
    if name == "tanh":
        return np.tanh(a)
    return a


def _activation_grad(name, a, z):
    if name == "relu":
        return (a > 0.0).astype(a.dtype)
    if name == "sigmoid":
        return z * (1.0 - z)
    if name == "tanh":
        return 1.0 - z * z
    return np.ones_like(a)


class Network:
    def __init__(self, input_width: int, specs, params=None):
        self.input_width = int(input_width)
        self.specs = tuple(specs)
        if not self.specs:
            raise ParameterError("a network needs at least one layer")
        dims = [self.input_width] + [s.width for s in self.specs]
        self.shapes = list(zip(dims[1:], dims[:-1]))  # (out, in)
        size = sum(o * i + o for o, i in self.shapes)
        if params is None:
            params = np.zeros(size)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (size,):
            raise ShapeError(f"expected {size} parameters, got {params.shape}")
        self.params = params
        self.weights, self.biases = self.views(params)

    @property
    def output_width(self):
        return self.specs[-1].width

    def views(self, flat):
        """Per-layer ``(weights, biases)`` views into a flat buffer."""
        ws, bs, pos = [], [], 0
        for o, i in self.shapes:
            ws.append(flat[pos:pos + o * i].reshape(o, i))
            pos += o * i
            bs.append(flat[pos:pos + o])
            pos += o
        return ws, bs

    def copy(self):
        return Network(self.input_width, self.specs, self.params.copy())

    def initialise(self, rng: np.random.Generator):
        """He-uniform for ReLU layers, Xavier-uniform otherwise; zero biases."""
        for W, b, spec in zip(self.weights, self.biases, self.specs):
            fan_out, fan_in = W.shape
            if spec.activation == "relu":
                limit = np.sqrt(6.0 / fan_in)
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
            W[...] = rng.uniform(-limit, limit, size=W.shape)
            b[...] = 0.0
        return self

    def forward(self, X):
        """Pre-activations and activations of every layer: ``[(a1, z1), ...]``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_width:
            raise ShapeError(f"expected input with {self.input_width} columns, got shape {X.shape}")
        out, z = [], X
        for W, b, spec in zip(self.weights, self.biases, self.specs):
            a = z @ W.T + b
            z = _activate(spec.activation, a)
            out.append((a, z))
        return out

    def predict(self, X, batch=8192):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] <= batch:
            return self.forward(X)[-1][1]
        return np.concatenate([self.forward(X[s:s + batch])[-1][1] for s in range(0, X.shape[0], batch)])

    # -- serialisation -------------------------------------------------------

    def to_bytes(self) -> bytes:
        w = Writer()
        w.raw(NETWORK_MAGIC)
        w.u32(NETWORK_VERSION)
        w.u64(self.input_width)
        w.u64(len(self.specs))
        for (o, i), spec in zip(self.shapes, self.specs):
            w.u64(i)
            w.u64(o)
            w.u8(ACTIVATIONS.index(spec.activation))
        for W, b in zip(self.weights, self.biases):
            w.f64_array(W)
            w.f64_array(b)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Network":
        r = Reader(data, "network")
        if r.raw(4) != NETWORK_MAGIC:
            raise CorruptArtifactError("not a network blob")
        version = r.u32()
        if version > NETWORK_VERSION:
            raise VersionError(version, NETWORK_VERSION)
        input_width = r.u64()
        specs = []
        prev = input_width
        for _ in range(r.u64()):
            i, o, act = r.u64(), r.u64(), r.u8()
            if i != prev or act >= len(ACTIVATIONS):
                raise CorruptArtifactError("layer dimensions do not chain")
            specs.append(LayerSpec(int(o), ACTIVATIONS[act]))
            prev = o
        net = cls(input_width, specs)
        parts = []
        for o, i in net.shapes:
            parts.append(r.f64_array(o * i))
            parts.append(r.f64_array(o))
        if r.remaining:
            raise CorruptArtifactError("trailing bytes after network weights")
        net.params[:] = np.concatenate(parts)
        return net

    def to_text(self) -> str:
        """JSON rendering for diffing (floats via repr, round-trip exact)."""
        return json.dumps({
            "input_width": self.input_width,
            "layers": [
                {"activation": s.activation, "weights": W.tolist(), "biases": b.tolist()}
                for s, W, b in zip(self.specs, self.weights, self.biases)
            ],
        }, indent=1)

    @classmethod
    def from_text(cls, text: str) -> "Network":
        data = json.loads(text)
        specs = [LayerSpec(len(layer["biases"]), layer["activation"]) for layer in data["layers"]]
        net = cls(data["input_width"], specs)
        for W, b, layer in zip(net.weights, net.biases, data["layers"]):
            W[...] = np.asarray(layer["weights"])
            b[...] = np.asarray(layer["biases"])
        return net


def forward(net: Network, X):
    return net.forward(X)


def _loss_and_grad(net: Network, X, T, loss, grad):
    acts = net.forward(X)
    n = X.shape[0]
    a_out, z_out = acts[-1]
    if loss == "mse":
        diff = z_out - T
        value = float(np.sum(diff * diff) / n)
        delta = (2.0 / n) * diff * _activation_grad(net.specs[-1].activation, a_out, z_out)
    else:
        if net.specs[-1].activation != "sigmoid":
            raise ParameterError("binary cross-entropy needs a sigmoid output layer")
        # softplus(a) - t*a is the cross-entropy of sigmoid(a), written stably
        value = float(np.sum(np.logaddexp(0.0, a_out) - T * a_out) / n)
        delta = (z_out - T) / n
    gW, gb = net.views(grad)
    for l in range(len(net.specs) - 1, -1, -1):
        z_prev = X if l == 0 else acts[l - 1][1]
        np.matmul(delta.T, z_prev, out=gW[l])
        np.sum(delta, axis=0, out=gb[l])
        if l:
            a_prev, zp = acts[l - 1]
            delta = (delta @ net.weights[l]) * _activation_grad(net.specs[l - 1].activation, a_prev, zp)
    return value


def loss_value(net: Network, X, targets, loss):
    X = np.asarray(X, dtype=np.float64)
    T = np.asarray(targets, dtype=np.float64).reshape(X.shape[0], -1)
    a_out, z_out = net.forward(X)[-1]
    n = X.shape[0]
    if loss == "mse":
        return float(np.sum((z_out - T) ** 2) / n)
    return float(np.sum(np.logaddexp(0.0, a_out) - T * a_out) / n)


def backprop(net: Network, X, targets, loss):
    """Mean-reduced loss and its exact gradient.

    Returns ``(value, grad)`` where ``grad`` is flat and laid out like
    ``net.params``; ``net.views(grad)`` splits it per layer.
    """
    if loss not in LOSSES:
        raise ParameterError(f"unknown loss {loss!r}")
    X = np.asarray(X, dtype=np.float64)
    T = np.asarray(targets, dtype=np.float64)
    if T.ndim == 1:
        T = T[:, None]
    if T.shape != (X.shape[0], net.output_width):
        raise ShapeError(f"targets shape {T.shape} does not match output ({X.shape[0]}, {net.output_width})")
    grad = np.zeros_like(net.params)
    value = _loss_and_grad(net, X, T, loss, grad)
    return value, grad


def train_network(net: Network, X, T, cfg: TrainConfig, rng: np.random.Generator):
    """Mini-batch Adam for ``cfg.epochs`` epochs; returns per-epoch mean losses."""
    X = np.asarray(X, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if T.ndim == 1:
        T = T[:, None]
    n = X.shape[0]
    opt = Adam(net.params, lr=cfg.learning_rate)
    grad = np.zeros_like(net.params)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            value = _loss_and_grad(net, X[idx], T[idx], cfg.loss, grad)
            total += value * idx.size
            opt.step(grad)
        mean = total / n
        if not np.isfinite(mean) or not np.all(np.isfinite(net.params)):
            raise TrainingError("training diverged: non-finite loss", epoch)
        history.append(mean)
    return history


@dataclass
class MlpModel:
    """Binary classifier: hidden layers plus one sigmoid output unit."""

    network: Network
    loss_history: list = field(default_factory=list)

    def predict_proba(self, X):
        return self.network.predict(X)[:, 0]


def train_mlp(hidden, X, y, cfg: TrainConfig) -> MlpModel:
    """Train an MLP head on (possibly soft) labels with binary cross-entropy."""
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise ShapeError("labels must be a vector matching X rows")
    if np.any(y < 0) or np.any(y > 1):
        raise ParameterError("labels must lie in [0, 1]")
    specs = list(hidden) + [LayerSpec(1, "sigmoid")]
    net = Network(X.shape[1], specs).initialise(make_rng(cfg.seed, "init"))
    cfg = TrainConfig(cfg.learning_rate, cfg.epochs, cfg.batch_size, cfg.seed, "binary_cross_entropy")
    history = train_network(net, X, y, cfg, make_rng(cfg.seed, "batches"))
    return MlpModel(net, history)


@dataclass
class AutoencoderModel:
    encoder: Network
    decoder: Network
    loss_history: list = field(default_factory=list)

    def __post_init__(self):
        if self.decoder.input_width != self.encoder.output_width:
            raise ShapeError("decoder input width must equal the latent width")
        if self.decoder.output_width != self.encoder.input_width:
            raise ShapeError("decoder output width must equal the encoder input width")

    @property
    def latent_width(self):
        return self.encoder.output_width

    def reconstruct(self, X):
        return self.decoder.predict(self.encoder.predict(X))


def mirrored_decoder(encoder_specs, input_width, activation="relu"):
    """Decoder layers: encoder widths reversed, ending in a sigmoid reconstruction."""
    widths = [s.width for s in encoder_specs][:-1][::-1]
    return [LayerSpec(w, activation) for w in widths] + [LayerSpec(input_width, "sigmoid")]


def train_autoencoder(encoder_specs, X, cfg: TrainConfig, decoder_specs=None) -> AutoencoderModel:
    """Train encoder and decoder jointly to minimise mean squared reconstruction error."""
    X = as_matrix(X)
    d = X.shape[1]
    encoder_specs = list(encoder_specs)
    if decoder_specs is None:
        decoder_specs = mirrored_decoder(encoder_specs, d)
    full = Network(d, encoder_specs + list(decoder_specs)).initialise(make_rng(cfg.seed, "init"))
    cfg = TrainConfig(cfg.learning_rate, cfg.epochs, cfg.batch_size, cfg.seed, "mse")
    history = train_network(full, X, X, cfg, make_rng(cfg.seed, "batches"))
    k = len(encoder_specs)
    n_enc = sum(o * i + o for o, i in full.shapes[:k])
    encoder = Network(d, encoder_specs, full.params[:n_enc].copy())
    decoder = Network(encoder_specs[-1].width, decoder_specs, full.params[n_enc:].copy())
    return AutoencoderModel(encoder, decoder, history)


def encode_latent(ae: AutoencoderModel, X):
    return ae.encoder.predict(X)
