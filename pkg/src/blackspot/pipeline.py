"""The proposed method: one-hot encode, compress with an autoencoder, MixUp in
the latent space, then train a small MLP head on the augmented latent set.

Artifact files use the shared container format with these sections::

    meta     JSON   config, encoding plan, schema text, fingerprints, counts
    encoder  network blob
    decoder  network blob
    head     network blob
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .augment import MixupConfig, augment_training
from .container import TAG_JSON, TAG_NETWORK, decode_container, encode_container
from .dataset import Dataset, _parse_schema
from .encoding import EncodingPlan, fit_encoding, transform
from .errors import (
    BlackspotError, CorruptArtifactError, FingerprintError, ParameterError, SchemaError, StageError,
)
from .neural import AutoencoderModel, MlpModel, Network, TrainConfig, encode_latent, layers, train_autoencoder, train_mlp
from .numerics import child_seed, make_rng

ARTIFACT_KIND = "proposed-pipeline"


@dataclass(frozen=True)
class ProposedConfig:
    encoder: tuple = (256, 64, 32)
    head: tuple = (32, 24, 6)
    learning_rate: float = 1e-4
    epochs: int = 100  # head
    autoencoder_epochs: int = 100
    batch_size: int = 32
    mixup: MixupConfig = field(default_factory=MixupConfig)
    seed: int = 0

    def __post_init__(self):
        if not self.encoder or not self.head:
            raise ParameterError("encoder and head need at least one layer each")
        # validates the numeric fields
        TrainConfig(self.learning_rate, self.epochs, self.batch_size, self.seed)
        TrainConfig(self.learning_rate, self.autoencoder_epochs, self.batch_size, self.seed)

    @property
    def latent_width(self):
        return self.encoder[-1]

    def to_dict(self):
        d = asdict(self)
        d["encoder"] = list(self.encoder)
        d["head"] = list(self.head)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["encoder"] = tuple(d["encoder"])
        d["head"] = tuple(d["head"])
        d["mixup"] = MixupConfig(**d["mixup"])
        return cls(**d)

    def with_overrides(self, **kw):
        """Flat overrides; ``pairs``, ``copies_per_pair``, ``alpha``, ``beta``
        and ``mode`` go to the MixUp block."""
        mix = {k: kw.pop(k) for k in ("pairs", "copies_per_pair", "alpha", "beta", "mode") if k in kw}
        unknown = set(kw) - set(self.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown proposed-pipeline parameter(s): {', '.join(sorted(unknown))}")
        for key in ("encoder", "head"):
            if key in kw:
                kw[key] = tuple(int(w) for w in kw[key])
        return replace(self, mixup=replace(self.mixup, **mix), **kw)


@dataclass
class PipelineArtifact:
    plan: EncodingPlan
    autoencoder: AutoencoderModel
    head: MlpModel
    config: ProposedConfig
    data_fingerprint: str
    metadata: dict = field(default_factory=dict)

    def state_fingerprint(self) -> str:
        """Hash over every fitted parameter; stored in saved files."""
        h = hashlib.sha256()
        h.update(self.data_fingerprint.encode())
        h.update(json.dumps(self.config.to_dict(), sort_keys=True).encode())
        h.update(self.plan.state_bytes())
        for net in (self.autoencoder.encoder, self.autoencoder.decoder, self.head.network):
            h.update(net.to_bytes())
        return h.hexdigest()


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except BlackspotError as exc:
        raise StageError(name, exc) from exc


def fit_proposed(ds: Dataset, rows=None, cfg: ProposedConfig | None = None) -> PipelineArtifact:
    """Fit the full pipeline on ``rows`` of ``ds`` (all rows when omitted)."""
    cfg = cfg or ProposedConfig()
    if ds.labels is None:
        raise ParameterError("training data needs target labels")
    if rows is None:
        rows = np.arange(len(ds))
    rows = np.asarray(rows)
    y = ds.labels[rows].astype(np.float64)
    counts = np.bincount(y.astype(int), minlength=2)
    if counts.min() < 2:
        raise ParameterError(f"need at least 2 samples per class, got {counts.tolist()}")

    plan = _stage("encode", fit_encoding, ds, rows)
    X = _stage("encode", transform, ds, plan, "onehot", rows)
    ae_cfg = TrainConfig(cfg.learning_rate, cfg.autoencoder_epochs, cfg.batch_size,
                         child_seed(cfg.seed, "autoencoder"))
    ae = _stage("autoencoder", train_autoencoder, layers(cfg.encoder), X, ae_cfg)
    Z = encode_latent(ae, X)
    Za, ya = _stage("mixup", augment_training, Z, y, cfg.mixup, make_rng(cfg.seed, "latent-mixup"))
    head_cfg = TrainConfig(cfg.learning_rate, cfg.epochs, cfg.batch_size, child_seed(cfg.seed, "head"))
    head = _stage("head", train_mlp, layers(cfg.head), Za, ya, head_cfg)
    meta = {
        "train_rows": int(rows.size),
        "train_positives": int(counts[1]),
        "onehot_width": plan.onehot_width,
        "head_train_rows": int(Za.shape[0]),
        "head_train_width": int(Za.shape[1]),
        "autoencoder_final_mse": ae.loss_history[-1],
        "head_final_loss": head.loss_history[-1],
    }
    return PipelineArtifact(plan, ae, head, cfg, ds.subset(rows).content_hash(), meta)


def latent_features(artifact: PipelineArtifact, ds: Dataset, rows=None):
    X = transform(ds, artifact.plan, "onehot", rows)
    return encode_latent(artifact.autoencoder, X)


def predict_proposed(artifact: PipelineArtifact, ds: Dataset, rows=None):
    """Scores in (0, 1) and labels at 0.5. No augmentation, no refitting."""
    if ds.schema.names != artifact.plan.schema.names:
        expected = set(artifact.plan.schema.names)
        missing = [n for n in artifact.plan.schema.names if n not in set(ds.schema.names)]
        extra = [n for n in ds.schema.names if n not in expected]
        name = (missing or extra or ["<order>"])[0]
        raise SchemaError(f"rows do not match the artifact schema (variable {name!r})", name)
    scores = artifact.head.predict_proba(latent_features(artifact, ds, rows))
    return scores, (scores >= 0.5).astype(np.int8)


# ---------------------------------------------------------------------------
# persistence


def artifact_to_bytes(artifact: PipelineArtifact) -> bytes:
    meta = {
        "kind": ARTIFACT_KIND,
        "config": artifact.config.to_dict(),
        "plan": artifact.plan.to_dict(),
        "schema": artifact.plan.schema.to_text(),
        "data_fingerprint": artifact.data_fingerprint,
        "state_fingerprint": artifact.state_fingerprint(),
        "metadata": artifact.metadata,
    }
    return encode_container([
        ("meta", TAG_JSON, json.dumps(meta, sort_keys=True).encode()),
        ("encoder", TAG_NETWORK, artifact.autoencoder.encoder.to_bytes()),
        ("decoder", TAG_NETWORK, artifact.autoencoder.decoder.to_bytes()),
        ("head", TAG_NETWORK, artifact.head.network.to_bytes()),
    ])


def artifact_from_bytes(data: bytes, expected_data_fingerprint: str | None = None) -> PipelineArtifact:
    sections = {name: (tag, payload) for name, tag, payload in decode_container(data)}
    if set(sections) != {"meta", "encoder", "decoder", "head"}:
        raise CorruptArtifactError(f"unexpected artifact sections {sorted(sections)}")
    meta = json.loads(sections["meta"][1].decode())
    if meta.get("kind") != ARTIFACT_KIND:
        raise CorruptArtifactError("container does not hold a proposed-pipeline artifact")
    schema = _parse_schema(meta["schema"], "<artifact>")
    artifact = PipelineArtifact(
        plan=EncodingPlan.from_dict(schema, meta["plan"]),
        autoencoder=AutoencoderModel(Network.from_bytes(sections["encoder"][1]),
                                     Network.from_bytes(sections["decoder"][1])),
        head=MlpModel(Network.from_bytes(sections["head"][1])),
        config=ProposedConfig.from_dict(meta["config"]),
        data_fingerprint=meta["data_fingerprint"],
        metadata=meta["metadata"],
    )
    if artifact.state_fingerprint() != meta["state_fingerprint"]:
        raise FingerprintError("artifact contents do not match their recorded fingerprint")
    if expected_data_fingerprint is not None and expected_data_fingerprint != artifact.data_fingerprint:
        raise FingerprintError(
            f"artifact was trained on data {artifact.data_fingerprint[:12]}, "
            f"expected {expected_data_fingerprint[:12]}")
    return artifact


def save_artifact(artifact: PipelineArtifact, path) -> bytes:
    data = artifact_to_bytes(artifact)
    Path(path).write_bytes(data)
    return data


def load_artifact(path, expected_data_fingerprint: str | None = None) -> PipelineArtifact:
    return artifact_from_bytes(Path(path).read_bytes(), expected_data_fingerprint)
