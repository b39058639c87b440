from __future__ import annotations

import numpy as np

from ..neural import LayerSpec, Network, TrainConfig, layers, train_mlp
from .base import TrainedModel, register

BASELINE_HIDDEN = (512, 7, 64, 32, 4)


@register
class MlpClassifier(TrainedModel):
    family = "mlp"
    threshold = 0.5

    def __init__(self, network: Network, metadata=None):
        self.network = network
        self.metadata = metadata or {}

    def score(self, X):
        return self.network.predict(np.asarray(X, dtype=np.float64))[:, 0]

    def to_state(self):
        net = self.network
        arch = {"input_width": net.input_width,
                "layers": [[s.width, s.activation] for s in net.specs]}
        return {"architecture": arch, "metadata": self.metadata}, {"params": net.params}

    @classmethod
    def from_state(cls, meta, arrays):
        arch = meta["architecture"]
        specs = [LayerSpec(int(w), a) for w, a in arch["layers"]]
        return cls(Network(arch["input_width"], specs, arrays["params"].copy()), meta["metadata"])


def fit_mlp(X, y, hidden=BASELINE_HIDDEN, learning_rate=1e-4, epochs=100, batch_size=32, seed=0):
    """ReLU hidden layers plus a sigmoid unit, trained with BCE on (soft) labels."""
    cfg = TrainConfig(learning_rate, epochs, batch_size, seed)
    model = train_mlp(layers(hidden), X, y, cfg)
    meta = {"hidden": list(hidden), "learning_rate": learning_rate, "epochs": epochs,
            "batch_size": batch_size, "final_loss": model.loss_history[-1]}
    return MlpClassifier(model.network, meta)
